//! Dwell detection at known bus stops.
//!
//! A sample is *active* for stop `k` when it lies within `window` meters of
//! the stop, the vehicle is stationary (`speed <= speed_eps`) and at least
//! one door is open. Maximal runs of active samples for the same stop,
//! allowing gaps of at most `max_gap` seconds between consecutive active
//! samples, become candidate dwells; only those lasting between `min_dwell`
//! and `max_dwell` seconds are kept.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::telemetry::{RouteModel, TelemetrySample};

pub const DWELL_HEADER: [&str; 4] = ["stop_id", "t_start_ms", "duration_s", "n_samples"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    pub window: f64,
    pub speed_eps: f64,
    pub min_dwell: f64,
    pub max_dwell: f64,
    pub max_gap: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            window: 20.0,
            speed_eps: 0.1,
            min_dwell: 5.0,
            max_dwell: 30.0,
            max_gap: 1.0,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<(), DetectionError> {
        let ok = self.window > 0.0
            && self.min_dwell > 0.0
            && self.min_dwell < self.max_dwell
            && self.speed_eps >= 0.0
            && self.max_gap >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(DetectionError::InvalidParams(*self))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellEvent {
    pub stop_id: u32,
    pub t_start_ms: i64,
    pub duration_s: f64,
    pub n_samples: usize,
}

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error("invalid detection parameters {0:?}")]
    InvalidParams(DetectionParams),
    #[error("sample {index} is not after the previous sample")]
    Unordered { index: usize },
    #[error("sample {index} has no position")]
    MissingPosition { index: usize },
    #[error("stops {first} and {second} are {distance:.2} m apart; windows of {window} m overlap")]
    StopsTooClose {
        first: u32,
        second: u32,
        distance: f64,
        window: f64,
    },
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct Run {
    stop: usize,
    first_ms: i64,
    last_ms: i64,
    n: usize,
}

pub fn detect_dwells(
    samples: &[TelemetrySample],
    route: &RouteModel,
    params: &DetectionParams,
) -> Result<Vec<DwellEvent>, DetectionError> {
    params.validate()?;
    check_stop_spacing(route, params.window)?;

    let stop_s: Vec<f64> = route.stops.iter().map(|s| s.s_m).collect();
    let max_gap_ms = params.max_gap * 1000.0;
    let mut events = Vec::new();
    let mut run: Option<Run> = None;

    let close = |run: Run, events: &mut Vec<DwellEvent>| {
        let duration_s = (run.last_ms - run.first_ms) as f64 / 1000.0;
        if duration_s >= params.min_dwell && duration_s <= params.max_dwell {
            events.push(DwellEvent {
                stop_id: route.stops[run.stop].id,
                t_start_ms: run.first_ms,
                duration_s,
                n_samples: run.n,
            });
        }
    };

    for (index, sample) in samples.iter().enumerate() {
        if index > 0 && sample.t_ms <= samples[index - 1].t_ms {
            return Err(DetectionError::Unordered { index });
        }
        if sample.speed_mps > params.speed_eps || !sample.any_door_open() {
            continue;
        }
        let s = sample
            .path_position(&route.path)
            .ok_or(DetectionError::MissingPosition { index })?;
        let Some(stop) = stop_in_window(&stop_s, s, params.window) else {
            continue;
        };

        match run.as_mut() {
            Some(r) if r.stop == stop && (sample.t_ms - r.last_ms) as f64 <= max_gap_ms => {
                r.last_ms = sample.t_ms;
                r.n += 1;
            }
            _ => {
                if let Some(done) = run.take() {
                    close(done, &mut events);
                }
                run = Some(Run {
                    stop,
                    first_ms: sample.t_ms,
                    last_ms: sample.t_ms,
                    n: 1,
                });
            }
        }
    }
    if let Some(done) = run.take() {
        close(done, &mut events);
    }

    events.sort_by_key(|e| e.t_start_ms);
    Ok(events)
}

/// Index of the stop whose window contains `s`. Stops are sorted and spaced
/// more than two windows apart, so at most one candidate exists.
fn stop_in_window(stop_s: &[f64], s: f64, window: f64) -> Option<usize> {
    let k = stop_s.partition_point(|&x| x < s - window);
    (k < stop_s.len() && (stop_s[k] - s).abs() <= window).then_some(k)
}

fn check_stop_spacing(route: &RouteModel, window: f64) -> Result<(), DetectionError> {
    for w in route.stops.windows(2) {
        let distance = w[1].s_m - w[0].s_m;
        if distance <= 2.0 * window {
            return Err(DetectionError::StopsTooClose {
                first: w[0].id,
                second: w[1].id,
                distance,
                window,
            });
        }
    }
    Ok(())
}

pub fn write_dwell_events<W: Write>(writer: W, events: &[DwellEvent]) -> Result<(), DetectionError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(DWELL_HEADER)?;
    for e in events {
        wtr.write_record([
            e.stop_id.to_string(),
            e.t_start_ms.to_string(),
            format!("{:.3}", e.duration_s),
            e.n_samples.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_dwell_events<R: Read>(reader: R) -> Result<Vec<DwellEvent>, DetectionError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != DWELL_HEADER {
        return Err(DetectionError::MalformedRow {
            line: 1,
            reason: format!("unexpected header {}", header.join(",")),
        });
    }
    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |what: &str| DetectionError::MalformedRow {
            line,
            reason: format!("bad {what}"),
        };
        if record.len() != DWELL_HEADER.len() {
            return Err(bad("field count"));
        }
        events.push(DwellEvent {
            stop_id: record[0].trim().parse().map_err(|_| bad("stop_id"))?,
            t_start_ms: record[1].trim().parse().map_err(|_| bad("t_start_ms"))?,
            duration_s: record[2].trim().parse().map_err(|_| bad("duration_s"))?,
            n_samples: record[3].trim().parse().map_err(|_| bad("n_samples"))?,
        });
    }
    Ok(events)
}
