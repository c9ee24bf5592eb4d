//! Sampled rollout of piecewise profiles, arrival metrics against the signal,
//! and an uninformed baseline driver to compare against.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::planner::{
    self, feasible_time_window, section1_solve, PlanError, ScenarioSpec, Segment, SegmentKind,
    SpeedProfile,
};
use crate::telemetry::{KinematicLimits, SignalTiming};

pub const DEFAULT_DT: f64 = 0.01;
pub const TRAJECTORY_HEADER: &str = "t_s,s_m,v_mps,a_mps2";

/// Samples closer than this to `s_int` count as being at the line.
const LINE_TOL: f64 = 1e-6;
/// Speeds below this count as standing still.
const REST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalState {
    Green,
    Red,
}

pub fn signal_state(signal: &SignalTiming, t: f64) -> SignalState {
    if signal.is_green(t) {
        SignalState::Green
    } else {
        SignalState::Red
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajPoint {
    pub t: f64,
    pub s: f64,
    pub v: f64,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub samples: Vec<TrajPoint>,
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("trajectory never reaches the intersection at s = {s_int} m (furthest {reached} m)")]
    NeverArrives { s_int: f64, reached: f64 },
    #[error("empty trajectory")]
    Empty,
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Samples a planned profile on a uniform grid from its start.
pub fn rollout(profile: &SpeedProfile, dt: f64) -> Result<Trajectory, SimError> {
    rollout_segments(&profile.segments, dt)
}

/// Samples consecutive segments at `t_start + k*dt`, each point evaluated in
/// closed form. The exact end of the last segment is appended when it does
/// not fall on the grid.
pub fn rollout_segments(segments: &[Segment], dt: f64) -> Result<Trajectory, SimError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::BadStep(dt));
    }
    let (Some(first), Some(last)) = (segments.first(), segments.last()) else {
        return Err(SimError::Empty);
    };
    let (t0, t_end) = (first.t_start, last.t_end());
    let point = |t: f64| {
        let (s, v, a) = planner::state_at(segments, t);
        TrajPoint {
            t,
            s,
            v: v.max(0.0),
            a,
        }
    };
    let steps = ((t_end - t0) / dt + 1e-9).floor() as usize;
    let mut samples: Vec<TrajPoint> = (0..=steps).map(|k| point(t0 + k as f64 * dt)).collect();
    let t_last = samples.last().map_or(t0, |p| p.t);
    if t_end - t_last > 1e-12 {
        samples.push(point(t_end));
    } else if let Some(p) = samples.last_mut() {
        // grid lands on the end up to round-off; pin the exact end state
        *p = TrajPoint {
            t: p.t,
            s: last.s_end,
            v: last.v_end.max(0.0),
            a: last.a,
        };
    }
    Ok(Trajectory { dt, samples })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    /// From the first sample to the arrival at the intersection.
    pub travel_time: f64,
    pub t_arrival: f64,
    pub stops_at_red: usize,
    /// Total standing time at the line while red.
    pub red_wait: f64,
    pub arrival_signal_state: SignalState,
    pub max_accel: f64,
    pub max_decel: f64,
    /// Against the declared arrival, when one is given.
    pub arrival_error_s: Option<f64>,
    pub arrival_error_m: Option<f64>,
}

/// Arrival is the first sample at or past `s_int`, refined by linear
/// interpolation in `s` against the previous sample.
pub fn evaluate(
    traj: &Trajectory,
    scenario: &ScenarioSpec,
    declared_arrival: Option<f64>,
) -> Result<SimMetrics, SimError> {
    let samples = &traj.samples;
    let first = samples.first().ok_or(SimError::Empty)?;
    let s_int = scenario.s_int;
    let idx = samples
        .iter()
        .position(|p| p.s >= s_int - 1e-9)
        .ok_or_else(|| SimError::NeverArrives {
            s_int,
            reached: samples.iter().map(|p| p.s).fold(f64::NEG_INFINITY, f64::max),
        })?;
    let t_arrival = if idx == 0 {
        samples[0].t
    } else {
        let (p, q) = (samples[idx - 1], samples[idx]);
        if q.s > p.s {
            p.t + (q.t - p.t) * ((s_int - p.s) / (q.s - p.s)).clamp(0.0, 1.0)
        } else {
            q.t
        }
    };

    // standing intervals at the line that overlap red
    let mut stops_at_red = 0;
    let mut red_wait = 0.0;
    let mut i = 0;
    while i < samples.len() {
        let at_rest = |p: &TrajPoint| p.v <= REST_TOL && (p.s - s_int).abs() <= LINE_TOL;
        if !at_rest(&samples[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < samples.len() && at_rest(&samples[i + 1]) {
            i += 1;
        }
        let run = &samples[start..=i];
        if run.iter().any(|p| !scenario.signal.is_green(p.t)) {
            stops_at_red += 1;
            // the stop begins when the line is reached, which may fall between samples
            let from = if start == idx { t_arrival } else { run[0].t };
            let to = run[run.len() - 1].t;
            let red_from = if scenario.signal.is_green(from) {
                red_onset(&scenario.signal, from)
            } else {
                from
            };
            red_wait += (to.min(scenario.signal.next_green_start(red_from)) - red_from).max(0.0);
        }
        i += 1;
    }

    let max_accel = samples.iter().map(|p| p.a).fold(0.0, f64::max);
    let max_decel = samples.iter().map(|p| -p.a).fold(0.0, f64::max);
    let (arrival_error_s, arrival_error_m) = match declared_arrival {
        Some(td) => {
            let s_at = interpolate_s(samples, td);
            (Some((t_arrival - td).abs()), Some((s_at - s_int).abs()))
        }
        None => (None, None),
    };
    Ok(SimMetrics {
        travel_time: t_arrival - first.t,
        t_arrival,
        stops_at_red,
        red_wait,
        arrival_signal_state: signal_state(&scenario.signal, t_arrival),
        max_accel,
        max_decel,
        arrival_error_s,
        arrival_error_m,
    })
}

/// First red instant at or after `t` when the light is green at `t`.
fn red_onset(signal: &SignalTiming, t: f64) -> f64 {
    t + (signal.green_duration - signal.phase(t)).max(0.0)
}

fn interpolate_s(samples: &[TrajPoint], t: f64) -> f64 {
    let idx = samples.partition_point(|p| p.t < t);
    match idx {
        0 => samples[0].s,
        i if i == samples.len() => samples[i - 1].s,
        i => {
            let (p, q) = (samples[i - 1], samples[i]);
            p.s + (q.s - p.s) * (t - p.t) / (q.t - p.t)
        }
    }
}

/// Baseline driver segments: full acceleration to the stop, the dwell, then
/// straight on to the intersection. When that arrives on red, section 2 is
/// replaced by a run that stops exactly at the line and holds until green.
pub fn baseline_segments(scenario: &ScenarioSpec) -> Result<Vec<Segment>, PlanError> {
    scenario.validate()?;
    let lim = &scenario.limits;
    let d1 = scenario.s_stop - scenario.s0;
    let d2 = scenario.s_int - scenario.s_stop;
    let window = feasible_time_window(scenario.v0, d1, lim)?;
    let section1 = section1_solve(scenario.v0, d1, window.t_min, lim)?;

    let mut segments: Vec<Segment> = section1
        .segments
        .iter()
        .map(|s| shift(s, scenario.t0, scenario.s0))
        .collect();
    let (t_stop, s_stop) = segments
        .last()
        .map_or((scenario.t0, scenario.s0), |s| (s.t_end(), s.s_end));
    segments.push(Segment::new(SegmentKind::Dwell, t_stop, s_stop, 0.0, 0.0, scenario.dwell));
    let t_go = t_stop + scenario.dwell;

    let free = planner::section2_plan(d2, lim)?;
    if scenario.signal.is_green(t_go + free.t2) {
        segments.extend(free.segments.iter().map(|s| shift(s, t_go, s_stop)));
        return Ok(segments);
    }
    let stopping = stop_at_line(d2, lim);
    let mut t = t_go;
    for (kind, a, duration) in stopping {
        let (s, v) = segments.last().map_or((s_stop, 0.0), |x| (x.s_end, x.v_end));
        let mut seg = Segment::new(kind, t, s, v, a, duration);
        if kind == SegmentKind::Brake {
            seg.v_end = 0.0;
            seg.s_end = scenario.s_int;
        }
        t = seg.t_end();
        segments.push(seg);
    }
    let wait = scenario.signal.next_green_start(t) - t;
    segments.push(Segment::new(SegmentKind::Hold, t, scenario.s_int, 0.0, 0.0, wait.max(0.0)));
    Ok(segments)
}

/// Accelerate from rest at `a2`, cruise at the limit if there is room, brake
/// to rest after exactly `d2` meters.
fn stop_at_line(d2: f64, lim: &KinematicLimits) -> Vec<(SegmentKind, f64, f64)> {
    let (a2, b, v_max) = (lim.a2, lim.brake, lim.v_max);
    let peak = (2.0 * d2 * a2 * b / (a2 + b)).sqrt();
    if peak <= v_max {
        vec![
            (SegmentKind::Accelerate, a2, peak / a2),
            (SegmentKind::Brake, -b, peak / b),
        ]
    } else {
        let ramps = v_max * v_max / (2.0 * a2) + v_max * v_max / (2.0 * b);
        vec![
            (SegmentKind::Accelerate, a2, v_max / a2),
            (SegmentKind::Cruise, 0.0, (d2 - ramps) / v_max),
            (SegmentKind::Brake, -b, v_max / b),
        ]
    }
}

fn shift(seg: &Segment, dt: f64, ds: f64) -> Segment {
    Segment {
        t_start: seg.t_start + dt,
        s_start: seg.s_start + ds,
        s_end: seg.s_end + ds,
        ..*seg
    }
}

pub fn baseline_driver(scenario: &ScenarioSpec, dt: f64) -> Result<Trajectory, SimError> {
    let segments = baseline_segments(scenario)?;
    rollout_segments(&segments, dt)
}

pub fn write_trajectory<W: Write>(traj: &Trajectory, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for p in &traj.samples {
        writeln!(out, "{:.4},{:.6},{:.6},{:.6}", p.t, p.s, p.v, p.a)?;
    }
    Ok(())
}
