//! Bus dwell-time statistics and green-light speed advisory planning.
//!
//! The pipeline runs telemetry logs through stop detection, clusters the
//! detected dwells by day type and time of day, fits a generalized extreme
//! value distribution per stop and cluster, and feeds the resulting dwell
//! estimate into a piecewise-constant-acceleration planner that times the
//! bus to reach the next signal on green.

pub mod dwell_stats;
pub mod gev;
pub mod planner;
pub mod simulator;
pub mod stop_detection;
pub mod telemetry;

pub use dwell_stats::{ClusterId, DwellStat, StatsTable};
pub use gev::GevParams;
pub use planner::{ProfileClass, ScenarioSpec, Segment, SegmentKind, SpeedProfile};
pub use simulator::{SignalState, SimMetrics, Trajectory};
pub use stop_detection::{DetectionParams, DwellEvent};
pub use telemetry::{KinematicLimits, RouteModel, SignalTiming, TelemetrySample};
