use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{RouteModel, TelemetryError, TelemetrySample, DOOR_COUNT};

/// One scheduled stop visit for the synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledVisit {
    pub stop_id: u32,
    /// Instant the doors open, epoch ms.
    pub t_start_ms: i64,
    /// Time the doors stay open, seconds; rounded to the sample period.
    pub duration_s: f64,
    /// Where the bus halts relative to the stop; drawn from the seed when absent.
    pub offset_m: Option<f64>,
    /// `false` produces a halt with every door closed.
    pub doors_open: bool,
}

impl ScheduledVisit {
    pub fn new(stop_id: u32, t_start_ms: i64, duration_s: f64) -> Self {
        Self {
            stop_id,
            t_start_ms,
            duration_s,
            offset_m: None,
            doors_open: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub period_ms: i64,
    /// Halt offsets drawn uniformly in ±this many meters.
    pub max_offset_m: f64,
    /// Cruise speeds drawn uniformly from this range, m/s.
    pub cruise_mps: (f64, f64),
    /// Approach and departure deceleration/acceleration, m/s².
    pub ramp_mps2: f64,
    /// Cruise time emitted before braking and after reaching cruise speed.
    pub lead_s: f64,
    /// Start time of the single drive emitted for an empty schedule.
    pub empty_start_ms: i64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            period_ms: 100,
            max_offset_m: 15.0,
            cruise_mps: (6.0, 10.5),
            ramp_mps2: 1.0,
            lead_s: 3.0,
            empty_start_ms: 0,
        }
    }
}

/// Generates a 10 Hz log that realizes every scheduled visit: an approach
/// at cruise speed, a brake to rest, closed-door idling, the door-open dwell,
/// more idling, and a departure. Consecutive visits are separate episodes;
/// the log has no samples between them.
pub fn synth_generate(
    route: &RouteModel,
    schedule: &[ScheduledVisit],
    seed: u64,
) -> Result<Vec<TelemetrySample>, TelemetryError> {
    synth_generate_with(route, schedule, seed, &SynthOptions::default())
}

pub fn synth_generate_with(
    route: &RouteModel,
    schedule: &[ScheduledVisit],
    seed: u64,
    opts: &SynthOptions,
) -> Result<Vec<TelemetrySample>, TelemetryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    if schedule.is_empty() {
        return Ok(drive_through(route, opts, &mut rng));
    }

    let mut order: Vec<usize> = (0..schedule.len()).collect();
    order.sort_by_key(|&i| schedule[i].t_start_ms);
    for w in order.windows(2) {
        let (a, b) = (&schedule[w[0]], &schedule[w[1]]);
        if a.t_start_ms + dwell_ms(a, opts) >= b.t_start_ms {
            return Err(TelemetryError::OverlappingVisits {
                first: w[0],
                second: w[1],
            });
        }
    }

    let mut samples: Vec<TelemetrySample> = Vec::new();
    let mut last_index: Option<usize> = None;
    for &i in &order {
        let visit = &schedule[i];
        let episode = episode(route, visit, opts, &mut rng)?;
        if let (Some(prev), Some(first)) = (samples.last(), episode.first()) {
            if first.t_ms <= prev.t_ms {
                return Err(TelemetryError::OverlappingVisits {
                    first: last_index.unwrap_or(i),
                    second: i,
                });
            }
        }
        samples.extend(episode);
        last_index = Some(i);
    }
    Ok(samples)
}

fn dwell_ms(visit: &ScheduledVisit, opts: &SynthOptions) -> i64 {
    let periods = (visit.duration_s.max(0.0) * 1000.0 / opts.period_ms as f64).round() as i64;
    periods * opts.period_ms
}

fn episode(
    route: &RouteModel,
    visit: &ScheduledVisit,
    opts: &SynthOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<TelemetrySample>, TelemetryError> {
    let stop = route
        .stop(visit.stop_id)
        .ok_or(TelemetryError::UnknownStop(visit.stop_id))?;
    let offset = match visit.offset_m {
        Some(o) => o,
        None => rng.gen_range(-opts.max_offset_m..=opts.max_offset_m),
    };
    let halt_s = stop.s_m + offset;
    let v_in = rng.gen_range(opts.cruise_mps.0..=opts.cruise_mps.1);
    let v_out = rng.gen_range(opts.cruise_mps.0..=opts.cruise_mps.1);
    let pre_idle = rng.gen_range(2..=10) * opts.period_ms;
    let post_idle = rng.gen_range(5..=15) * opts.period_ms;
    let doors = door_pattern(visit.doors_open, rng);

    let period = opts.period_ms;
    let b = opts.ramp_mps2;
    let t_open = visit.t_start_ms;
    let t_close = t_open + dwell_ms(visit, opts);
    let t_halt = t_open - pre_idle;
    let t_go = t_close + post_idle;

    let sample = |t_ms: i64, s: f64, v: f64, doors: [bool; DOOR_COUNT]| TelemetrySample {
        t_ms,
        lat_lon: Some(route.path.point_at(s)),
        s_m: Some(s),
        speed_mps: v,
        doors,
    };
    let closed = [false; DOOR_COUNT];

    let mut out = Vec::new();

    // approach, emitted backwards from the halt instant
    let brake_s = v_in / b;
    let approach_s = brake_s + opts.lead_s;
    let n_in = (approach_s * 1000.0 / period as f64).floor() as i64;
    for k in (1..=n_in).rev() {
        let tau = (k * period) as f64 / 1000.0;
        let (s, v) = if tau <= brake_s {
            (halt_s - 0.5 * b * tau * tau, b * tau)
        } else {
            (
                halt_s - v_in * v_in / (2.0 * b) - v_in * (tau - brake_s),
                v_in,
            )
        };
        out.push(sample(t_halt - k * period, s, v, closed));
    }

    let mut t = t_halt;
    while t <= t_go {
        let open = t >= t_open && t <= t_close;
        out.push(sample(t, halt_s, 0.0, if open { doors } else { closed }));
        t += period;
    }

    let accel_s = v_out / b;
    let depart_s = accel_s + opts.lead_s;
    let n_out = (depart_s * 1000.0 / period as f64).floor() as i64;
    for k in 1..=n_out {
        let tau = (k * period) as f64 / 1000.0;
        let (s, v) = if tau <= accel_s {
            (halt_s + 0.5 * b * tau * tau, b * tau)
        } else {
            (
                halt_s + v_out * v_out / (2.0 * b) + v_out * (tau - accel_s),
                v_out,
            )
        };
        out.push(sample(t_go + k * period, s, v, closed));
    }
    Ok(out)
}

fn door_pattern(open: bool, rng: &mut ChaCha8Rng) -> [bool; DOOR_COUNT] {
    if !open {
        return [false; DOOR_COUNT];
    }
    loop {
        let mask: u8 = rng.gen_range(1..16);
        let doors = std::array::from_fn(|k| mask & (1 << k) != 0);
        if doors.iter().any(|&d| d) {
            return doors;
        }
    }
}

fn drive_through(
    route: &RouteModel,
    opts: &SynthOptions,
    rng: &mut ChaCha8Rng,
) -> Vec<TelemetrySample> {
    let v = rng.gen_range(opts.cruise_mps.0..=opts.cruise_mps.1);
    let length = route.path.length();
    let mut out = Vec::new();
    let mut k = 0i64;
    loop {
        let s = v * (k * opts.period_ms) as f64 / 1000.0;
        if s > length {
            break;
        }
        out.push(TelemetrySample {
            t_ms: opts.empty_start_ms + k * opts.period_ms,
            lat_lon: Some(route.path.point_at(s)),
            s_m: Some(s),
            speed_mps: v,
            doors: [false; DOOR_COUNT],
        });
        k += 1;
    }
    out
}
