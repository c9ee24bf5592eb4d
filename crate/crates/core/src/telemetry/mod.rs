//! Vehicle telemetry: the sample model, the CSV log format, route geometry
//! and a synthetic log generator used to exercise the detector.

mod csv_log;
mod path;
mod route;
mod synth;

pub use csv_log::{parse_telemetry, write_telemetry, TELEMETRY_HEADER};
pub use path::{LatLon, Polyline};
pub use route::{
    load_route, parse_route, Intersection, KinematicLimits, RouteModel, SignalTiming, Stop,
};
pub use synth::{synth_generate, synth_generate_with, ScheduledVisit, SynthOptions};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of passenger door channels on the vehicle.
pub const DOOR_COUNT: usize = 4;

/// One time-stamped vehicle state record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    /// Epoch time in milliseconds.
    pub t_ms: i64,
    pub lat_lon: Option<LatLon>,
    /// Position along the route path, meters.
    pub s_m: Option<f64>,
    pub speed_mps: f64,
    pub doors: [bool; DOOR_COUNT],
}

impl TelemetrySample {
    pub fn any_door_open(&self) -> bool {
        self.doors.iter().any(|&d| d)
    }

    /// Path position, projecting the geographic fix onto `path` when the
    /// sample does not already carry one.
    pub fn path_position(&self, path: &Polyline) -> Option<f64> {
        match (self.s_m, self.lat_lon) {
            (Some(s), _) => Some(s),
            (None, Some(p)) => Some(path.project(p)),
            (None, None) => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: timestamp {t_ms} is not after the previous one")]
    NonMonotonicTimestamp { line: usize, t_ms: i64 },
    #[error("line {line}: both lat/lon and s_m are empty")]
    MissingPosition { line: usize },
    #[error("unexpected header {found:?}")]
    BadHeader { found: String },
    #[error("degenerate path: fewer than two distinct vertices")]
    DegeneratePath,
    #[error("path vertex {index} repeats the previous vertex")]
    RepeatedVertex { index: usize },
    #[error("route schema: {0}")]
    Schema(String),
    #[error("{what} at s = {s_m} m lies outside the path [0, {length}]")]
    OutOfRange { what: String, s_m: f64, length: f64 },
    #[error("{0} are not sorted by path position")]
    Unsorted(&'static str),
    #[error("invalid signal timing: {0}")]
    InvalidTiming(String),
    #[error("invalid kinematic limits: {0}")]
    InvalidLimits(String),
    #[error("scheduled visits {first} and {second} overlap in time")]
    OverlappingVisits { first: usize, second: usize },
    #[error("unknown stop id {0}")]
    UnknownStop(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
