use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LatLon, Polyline, TelemetryError};

/// Fixed-cycle signal plan. Green intervals are
/// `[k·cycle + green_start, k·cycle + green_start + green_duration)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalTiming {
    pub cycle: f64,
    pub green_start: f64,
    pub green_duration: f64,
}

impl SignalTiming {
    pub fn new(cycle: f64, green_start: f64, green_duration: f64) -> Result<Self, TelemetryError> {
        let timing = Self {
            cycle,
            green_start,
            green_duration,
        };
        timing.validate()?;
        Ok(timing)
    }

    pub fn validate(&self) -> Result<(), TelemetryError> {
        let bad = |msg: String| Err(TelemetryError::InvalidTiming(msg));
        if !(self.cycle.is_finite() && self.cycle > 0.0) {
            return bad(format!("cycle must be positive, got {}", self.cycle));
        }
        if !(self.green_start >= 0.0 && self.green_start < self.cycle) {
            return bad(format!(
                "green_start {} outside [0, {})",
                self.green_start, self.cycle
            ));
        }
        if !(self.green_duration > 0.0 && self.green_duration < self.cycle) {
            return bad(format!(
                "green_duration {} outside (0, {})",
                self.green_duration, self.cycle
            ));
        }
        Ok(())
    }

    /// Offset of `t` into the current cycle measured from the green start,
    /// in `[0, cycle)`. Offsets within 1e-9 s of a full cycle snap to zero so
    /// that computed switching instants read as green.
    pub fn phase(&self, t: f64) -> f64 {
        let phase = (t - self.green_start).rem_euclid(self.cycle);
        if self.cycle - phase < SWITCH_SNAP_S {
            0.0
        } else {
            phase
        }
    }

    pub fn is_green(&self, t: f64) -> bool {
        self.phase(t) < self.green_duration
    }

    /// Earliest red-to-green switching instant at or after `t`.
    pub fn next_green_start(&self, t: f64) -> f64 {
        let k = ((t - self.green_start) / self.cycle).floor();
        [k - 1.0, k, k + 1.0]
            .into_iter()
            .map(|k| self.green_start + k * self.cycle)
            .find(|&start| start >= t - SWITCH_SNAP_S)
            .expect("one of three consecutive switches follows t")
    }
}

const SWITCH_SNAP_S: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicLimits {
    /// Speed limit, m/s.
    pub v_max: f64,
    /// Braking deceleration magnitude, m/s².
    pub brake: f64,
    /// Acceleration leaving the stop, m/s².
    pub a2: f64,
    /// Bounds on the free acceleration before the stop, m/s².
    pub a1_max: f64,
    pub a1_min: f64,
}

impl Default for KinematicLimits {
    fn default() -> Self {
        Self {
            v_max: 40.0 / 3.6,
            brake: 1.0,
            a2: 1.0,
            a1_max: 1.5,
            a1_min: 0.05,
        }
    }
}

impl KinematicLimits {
    pub fn validate(&self) -> Result<(), TelemetryError> {
        let fields = [
            ("v_max", self.v_max),
            ("brake", self.brake),
            ("a2", self.a2),
            ("a1_max", self.a1_max),
            ("a1_min", self.a1_min),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(TelemetryError::InvalidLimits(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.a1_min >= self.a1_max {
            return Err(TelemetryError::InvalidLimits(format!(
                "a1_min {} must be below a1_max {}",
                self.a1_min, self.a1_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub id: u32,
    pub name: String,
    pub s_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intersection {
    pub id: u32,
    pub s_m: f64,
    pub timing: SignalTiming,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteModel {
    pub path: Polyline,
    pub stops: Vec<Stop>,
    pub intersections: Vec<Intersection>,
    pub limits: KinematicLimits,
}

impl RouteModel {
    pub fn new(
        path: Polyline,
        stops: Vec<Stop>,
        intersections: Vec<Intersection>,
        limits: KinematicLimits,
    ) -> Result<Self, TelemetryError> {
        let length = path.length();
        for stop in &stops {
            check_range(&format!("stop {}", stop.id), stop.s_m, length)?;
        }
        for int in &intersections {
            check_range(&format!("intersection {}", int.id), int.s_m, length)?;
            int.timing.validate()?;
        }
        if stops.windows(2).any(|w| w[1].s_m < w[0].s_m) {
            return Err(TelemetryError::Unsorted("stops"));
        }
        if intersections.windows(2).any(|w| w[1].s_m < w[0].s_m) {
            return Err(TelemetryError::Unsorted("intersections"));
        }
        limits.validate()?;
        Ok(Self {
            path,
            stops,
            intersections,
            limits,
        })
    }

    pub fn stop(&self, id: u32) -> Option<&Stop> {
        self.stops.iter().find(|s| s.id == id)
    }

    pub fn intersection(&self, id: u32) -> Option<&Intersection> {
        self.intersections.iter().find(|i| i.id == id)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let file = RouteFile {
            path: self
                .path
                .vertices()
                .iter()
                .map(|p| [p.lat, p.lon])
                .collect(),
            stops: self.stops.clone(),
            intersections: self
                .intersections
                .iter()
                .map(|i| IntersectionRecord {
                    id: i.id,
                    s_m: i.s_m,
                    cycle_s: i.timing.cycle,
                    green_start_s: i.timing.green_start,
                    green_dur_s: i.timing.green_duration,
                })
                .collect(),
            limits: self.limits.into(),
        };
        serde_json::to_value(file).expect("route serializes")
    }
}

fn check_range(what: &str, s_m: f64, length: f64) -> Result<(), TelemetryError> {
    if !(s_m.is_finite() && (0.0..=length).contains(&s_m)) {
        return Err(TelemetryError::OutOfRange {
            what: what.to_string(),
            s_m,
            length,
        });
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RouteFile {
    path: Vec<[f64; 2]>,
    stops: Vec<Stop>,
    intersections: Vec<IntersectionRecord>,
    #[serde(default)]
    limits: LimitsRecord,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntersectionRecord {
    id: u32,
    s_m: f64,
    cycle_s: f64,
    green_start_s: f64,
    green_dur_s: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct LimitsRecord {
    v_max_mps: f64,
    brake_mps2: f64,
    a2_mps2: f64,
    a1_max_mps2: f64,
    a1_min_mps2: f64,
}

impl Default for LimitsRecord {
    fn default() -> Self {
        KinematicLimits::default().into()
    }
}

impl From<KinematicLimits> for LimitsRecord {
    fn from(l: KinematicLimits) -> Self {
        Self {
            v_max_mps: l.v_max,
            brake_mps2: l.brake,
            a2_mps2: l.a2,
            a1_max_mps2: l.a1_max,
            a1_min_mps2: l.a1_min,
        }
    }
}

/// Parses and validates a route from its JSON text.
pub fn parse_route(text: &str) -> Result<RouteModel, TelemetryError> {
    let file: RouteFile =
        serde_json::from_str(text).map_err(|e| TelemetryError::Schema(e.to_string()))?;
    let path = Polyline::new(
        file.path
            .iter()
            .map(|&[lat, lon]| LatLon { lat, lon })
            .collect(),
    )?;
    let intersections = file
        .intersections
        .into_iter()
        .map(|r| Intersection {
            id: r.id,
            s_m: r.s_m,
            timing: SignalTiming {
                cycle: r.cycle_s,
                green_start: r.green_start_s,
                green_duration: r.green_dur_s,
            },
        })
        .collect();
    let limits = KinematicLimits {
        v_max: file.limits.v_max_mps,
        brake: file.limits.brake_mps2,
        a2: file.limits.a2_mps2,
        a1_max: file.limits.a1_max_mps2,
        a1_min: file.limits.a1_min_mps2,
    };
    RouteModel::new(path, file.stops, intersections, limits)
}

pub fn load_route(path: impl AsRef<Path>) -> Result<RouteModel, TelemetryError> {
    let text = std::fs::read_to_string(path)?;
    parse_route(&text)
}
