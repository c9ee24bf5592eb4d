//! Speed profile synthesis from the current state to the next signalized
//! intersection through a bus stop.
//!
//! The trip splits at the stop. Section 1 (start → stop) accelerates at a
//! free rate `a1`, optionally cruises at the speed limit, and brakes to rest
//! at the fixed braking rate. After the dwell, section 2 (stop →
//! intersection) accelerates at the fixed rate `a2` and cruises at the limit
//! if the distance allows it. Which sections cruise gives the class:
//!
//! | class | section 1 cruise | section 2 cruise |
//! |-------|------------------|------------------|
//! | P1    | no               | no               |
//! | P2    | no               | yes              |
//! | P3    | yes              | no               |
//! | P4    | yes              | yes              |
//!
//! Section 2 is fully determined by geometry. The arrival time is chosen
//! against the signal plan and section 1 is solved in closed form to take
//! exactly the remaining time.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::telemetry::{KinematicLimits, SignalTiming};

/// Slack on acceleration bounds and speeds for round-off in closed forms.
const A_TOL: f64 = 1e-9;
const V_TOL: f64 = 1e-9;
/// Negative cruise durations down to this size are treated as zero.
const T_TOL: f64 = 1e-9;
const D_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Accelerate,
    Cruise,
    Brake,
    Dwell,
    /// Waiting at the stop line; only produced by the baseline driver.
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub t_start: f64,
    pub duration: f64,
    pub a: f64,
    pub v_start: f64,
    pub v_end: f64,
    pub s_start: f64,
    pub s_end: f64,
}

impl Segment {
    pub fn new(kind: SegmentKind, t_start: f64, s_start: f64, v_start: f64, a: f64, duration: f64) -> Self {
        Self {
            kind,
            t_start,
            duration,
            a,
            v_start,
            v_end: v_start + a * duration,
            s_start,
            s_end: s_start + v_start * duration + 0.5 * a * duration * duration,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.duration
    }

    /// Position, speed and acceleration at absolute time `t`, evaluated in
    /// closed form (`t` is not clamped to the segment).
    pub fn state_at(&self, t: f64) -> (f64, f64, f64) {
        let tau = t - self.t_start;
        (
            self.s_start + self.v_start * tau + 0.5 * self.a * tau * tau,
            self.v_start + self.a * tau,
            self.a,
        )
    }

    /// Same segment shifted in time and space.
    fn shifted(&self, dt: f64, ds: f64) -> Self {
        Self {
            t_start: self.t_start + dt,
            s_start: self.s_start + ds,
            s_end: self.s_end + ds,
            ..*self
        }
    }
}

/// Closed-form `(s, v, a)` at `t` along consecutive segments, clamped to
/// their time span. At a boundary the later segment wins.
pub fn state_at(segments: &[Segment], t: f64) -> (f64, f64, f64) {
    let Some(first) = segments.first() else {
        return (0.0, 0.0, 0.0);
    };
    if t <= first.t_start {
        return first.state_at(first.t_start);
    }
    let idx = segments.partition_point(|s| s.t_end() <= t);
    match segments.get(idx) {
        Some(seg) => seg.state_at(t),
        None => {
            let last = segments.last().expect("non-empty");
            (last.s_end, last.v_end, last.a)
        }
    }
}

/// Appends segments so that each starts where the previous one ends.
struct Chain {
    segments: Vec<Segment>,
    t: f64,
    s: f64,
    v: f64,
}

impl Chain {
    fn new(t: f64, s: f64, v: f64) -> Self {
        Self {
            segments: Vec::new(),
            t,
            s,
            v,
        }
    }

    fn push(&mut self, kind: SegmentKind, a: f64, duration: f64) {
        let seg = Segment::new(kind, self.t, self.s, self.v, a, duration);
        self.t = seg.t_end();
        self.s = seg.s_end;
        self.v = seg.v_end;
        self.segments.push(seg);
    }

    /// Pushes a segment that must end at rest, pinning the end speed to zero.
    fn push_to_rest(&mut self, kind: SegmentKind, a: f64, duration: f64) {
        self.push(kind, a, duration);
        let last = self.segments.last_mut().expect("just pushed");
        last.v_end = 0.0;
        self.v = 0.0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProfileClass {
    P1,
    P2,
    P3,
    P4,
}

impl ProfileClass {
    pub fn from_cruise_flags(section1_cruise: bool, section2_cruise: bool) -> Self {
        match (section1_cruise, section2_cruise) {
            (false, false) => ProfileClass::P1,
            (false, true) => ProfileClass::P2,
            (true, false) => ProfileClass::P3,
            (true, true) => ProfileClass::P4,
        }
    }

    pub fn cruise_flags(self) -> (bool, bool) {
        match self {
            ProfileClass::P1 => (false, false),
            ProfileClass::P2 => (false, true),
            ProfileClass::P3 => (true, false),
            ProfileClass::P4 => (true, true),
        }
    }
}

impl fmt::Display for ProfileClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub s0: f64,
    pub v0: f64,
    pub s_stop: f64,
    pub dwell: f64,
    pub s_int: f64,
    pub signal: SignalTiming,
    /// Current time on the signal clock, seconds.
    pub t0: f64,
    pub limits: KinematicLimits,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: String| Err(PlanError::InvalidScenario(m));
        let finite = [self.s0, self.v0, self.s_stop, self.dwell, self.s_int, self.t0];
        if finite.iter().any(|x| !x.is_finite()) {
            return bad("non-finite scenario field".into());
        }
        if !(self.s0 <= self.s_stop && self.s_stop <= self.s_int) {
            return bad(format!(
                "positions must satisfy s0 {} <= s_stop {} <= s_int {}",
                self.s0, self.s_stop, self.s_int
            ));
        }
        if !(0.0..=self.limits.v_max).contains(&self.v0) {
            return bad(format!("v0 {} outside [0, {}]", self.v0, self.limits.v_max));
        }
        if self.dwell < 0.0 {
            return bad(format!("negative dwell {}", self.dwell));
        }
        self.signal
            .validate()
            .map_err(|e| PlanError::InvalidScenario(e.to_string()))?;
        self.limits
            .validate()
            .map_err(|e| PlanError::InvalidScenario(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub class: ProfileClass,
    /// Acceleration before the stop; absent when section 1 has no
    /// acceleration stage (already at the stop, or braking immediately).
    pub a1: Option<f64>,
    pub t_arrival: f64,
    pub segments: Vec<Segment>,
}

impl SpeedProfile {
    pub fn t_start(&self) -> f64 {
        self.segments.first().map_or(self.t_arrival, |s| s.t_start)
    }

    /// Closed-form state at `t`, clamped to the profile's time span.
    pub fn state_at(&self, t: f64) -> (f64, f64, f64) {
        state_at(&self.segments, t)
    }

    /// Checks every structural invariant against `scenario`; returns a
    /// description of the first violation.
    pub fn check(&self, scenario: &ScenarioSpec, tol: f64) -> Result<(), String> {
        let lim = &scenario.limits;
        let first = self.segments.first().ok_or("empty profile")?;
        if (first.t_start - scenario.t0).abs() > tol || (first.s_start - scenario.s0).abs() > tol {
            return Err(format!("profile starts at ({}, {})", first.t_start, first.s_start));
        }
        if (first.v_start - scenario.v0).abs() > tol {
            return Err(format!("profile starts at speed {}", first.v_start));
        }
        for (i, pair) in self.segments.windows(2).enumerate() {
            let (a, b) = (&pair[0], &pair[1]);
            if (a.t_end() - b.t_start).abs() > tol || (a.s_end - b.s_start).abs() > tol {
                return Err(format!("gap between segments {i} and {}", i + 1));
            }
            if (a.v_end - b.v_start).abs() > tol {
                return Err(format!("speed jump between segments {i} and {}", i + 1));
            }
        }
        let mut dwells = 0;
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.duration < 0.0 {
                return Err(format!("segment {i} has negative duration"));
            }
            let v_lo = seg.v_start.min(seg.v_end);
            let v_hi = seg.v_start.max(seg.v_end);
            if v_lo < -tol || v_hi > lim.v_max + tol {
                return Err(format!("segment {i} speed outside [0, v_max]"));
            }
            match seg.kind {
                SegmentKind::Brake if seg.a != -lim.brake => {
                    return Err(format!("brake segment {i} has a = {}", seg.a))
                }
                SegmentKind::Dwell => {
                    dwells += 1;
                    if seg.v_start != 0.0 || seg.v_end != 0.0 || seg.a != 0.0 {
                        return Err(format!("dwell segment {i} is not at rest"));
                    }
                    if (seg.duration - scenario.dwell).abs() > tol {
                        return Err(format!("dwell lasts {} s", seg.duration));
                    }
                    if (seg.s_start - scenario.s_stop).abs() > tol {
                        return Err(format!("dwell at s = {}", seg.s_start));
                    }
                }
                SegmentKind::Cruise if seg.a != 0.0 => {
                    return Err(format!("cruise segment {i} accelerates"))
                }
                _ => {}
            }
        }
        if dwells != 1 {
            return Err(format!("{dwells} dwell segments"));
        }
        if let Some(a1) = self.a1 {
            if a1 < lim.a1_min - tol || a1 > lim.a1_max + tol {
                return Err(format!("a1 = {a1} outside bounds"));
            }
        }
        let last = self.segments.last().expect("non-empty");
        if (last.s_end - scenario.s_int).abs() > tol || (last.t_end() - self.t_arrival).abs() > tol {
            return Err(format!(
                "profile ends at ({}, {}) instead of ({}, {})",
                last.t_end(),
                last.s_end,
                self.t_arrival,
                scenario.s_int
            ));
        }
        if !scenario.signal.is_green(self.t_arrival) {
            return Err(format!("signal is red at arrival {}", self.t_arrival));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("distance to the intersection must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("overrun: stopping from the current speed needs {required:.3} m, only {available:.3} m left")]
    Overrun { required: f64, available: f64 },
    #[error("no green start reachable in the arrival window [{t_min:.3}, {t_max:.3}] s; next switch at {next_green:.3} s")]
    NoGreen {
        t_min: f64,
        t_max: f64,
        next_green: f64,
    },
    #[error("section 1 cannot be completed in {t1:.6} s: {reason}")]
    Infeasible { t1: f64, reason: String },
}

/// Section 2 from rest at the stop over `d2` meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Section2Plan {
    pub has_cruise: bool,
    pub t2: f64,
    pub v_peak: f64,
    /// Segments relative to t = 0, s = 0.
    pub segments: Vec<Segment>,
}

/// Distance needed to reach the speed limit from rest at `a2`.
pub fn cruise_threshold(limits: &KinematicLimits) -> f64 {
    limits.v_max * limits.v_max / (2.0 * limits.a2)
}

pub fn section2_plan(d2: f64, limits: &KinematicLimits) -> Result<Section2Plan, PlanError> {
    if !(d2 > 0.0) {
        return Err(PlanError::NonPositiveDistance(d2));
    }
    let (v_max, a2) = (limits.v_max, limits.a2);
    let threshold = cruise_threshold(limits);
    let mut chain = Chain::new(0.0, 0.0, 0.0);
    if d2 >= threshold {
        let t_acc = v_max / a2;
        let t_cruise = (d2 - threshold) / v_max;
        chain.push(SegmentKind::Accelerate, a2, t_acc);
        chain.v = v_max;
        if t_cruise > 0.0 {
            chain.push(SegmentKind::Cruise, 0.0, t_cruise);
        }
        Ok(Section2Plan {
            has_cruise: true,
            t2: t_acc + t_cruise,
            v_peak: v_max,
            segments: chain.segments,
        })
    } else {
        let t2 = (2.0 * d2 / a2).sqrt();
        chain.push(SegmentKind::Accelerate, a2, t2);
        Ok(Section2Plan {
            has_cruise: false,
            t2,
            v_peak: (2.0 * a2 * d2).sqrt(),
            segments: chain.segments,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub t_min: f64,
    pub t_max: f64,
}

/// How section 1 ends up being shaped for a given distance and start speed.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Section1Kind {
    /// Already at rest at the stop.
    Empty,
    /// Just the brake to rest.
    BrakeOnly,
    /// Acceleration stage followed by the brake.
    Ramp,
}

fn section1_kind(v0: f64, d1: f64, limits: &KinematicLimits) -> Result<Section1Kind, PlanError> {
    let brake_dist = v0 * v0 / (2.0 * limits.brake);
    if d1 < brake_dist - D_TOL {
        return Err(PlanError::Overrun {
            required: brake_dist,
            available: d1,
        });
    }
    if v0 == 0.0 && d1 <= D_TOL {
        Ok(Section1Kind::Empty)
    } else if d1 - brake_dist <= D_TOL {
        Ok(Section1Kind::BrakeOnly)
    } else {
        Ok(Section1Kind::Ramp)
    }
}

/// Section 1 duration when accelerating at `a1`: a triangle if the peak stays
/// under the limit, otherwise a trapezoid cruising at the limit.
fn section1_duration(v0: f64, d1: f64, a1: f64, limits: &KinematicLimits) -> f64 {
    let (b, v_max) = (limits.brake, limits.v_max);
    let peak = ((2.0 * a1 * b * d1 + b * v0 * v0) / (a1 + b)).sqrt();
    if peak <= v_max {
        (peak - v0) / a1 + peak / b
    } else {
        let ramp_dist = (v_max * v_max - v0 * v0) / (2.0 * a1) + v_max * v_max / (2.0 * b);
        (v_max - v0) / a1 + v_max / b + (d1 - ramp_dist) / v_max
    }
}

/// Section 1 duration range: fastest at `a1_max`, slowest at `a1_min`.
pub fn feasible_time_window(
    v0: f64,
    d1: f64,
    limits: &KinematicLimits,
) -> Result<TimeWindow, PlanError> {
    match section1_kind(v0, d1, limits)? {
        Section1Kind::Empty => Ok(TimeWindow {
            t_min: 0.0,
            t_max: 0.0,
        }),
        Section1Kind::BrakeOnly => {
            let t = v0 / limits.brake;
            Ok(TimeWindow { t_min: t, t_max: t })
        }
        Section1Kind::Ramp => Ok(TimeWindow {
            t_min: section1_duration(v0, d1, limits.a1_max, limits),
            t_max: section1_duration(v0, d1, limits.a1_min, limits),
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section1Plan {
    pub a1: Option<f64>,
    pub has_cruise: bool,
    /// Peak speed of a triangle, or the cruise speed of a trapezoid.
    pub v_peak: f64,
    /// Segments relative to t = 0, s = 0.
    pub segments: Vec<Segment>,
}

fn within_bounds(a1: f64, limits: &KinematicLimits) -> bool {
    a1 >= limits.a1_min - A_TOL && a1 <= limits.a1_max + A_TOL
}

/// Solves section 1 to cover `d1` meters in exactly `t1` seconds from speed
/// `v0`, ending at rest. Tries accelerate–brake first, then
/// accelerate–cruise–brake with the cruise at the speed limit.
pub fn section1_solve(
    v0: f64,
    d1: f64,
    t1: f64,
    limits: &KinematicLimits,
) -> Result<Section1Plan, PlanError> {
    let (b, v_max) = (limits.brake, limits.v_max);
    let infeasible = |reason: &str| PlanError::Infeasible {
        t1,
        reason: reason.to_string(),
    };
    let mut chain = Chain::new(0.0, 0.0, v0);

    match section1_kind(v0, d1, limits)? {
        Section1Kind::Empty => {
            if t1.abs() > T_TOL {
                return Err(infeasible("already at the stop"));
            }
            return Ok(Section1Plan {
                a1: None,
                has_cruise: false,
                v_peak: 0.0,
                segments: Vec::new(),
            });
        }
        Section1Kind::BrakeOnly => {
            if (t1 - v0 / b).abs() > T_TOL {
                return Err(infeasible("only an immediate brake reaches the stop"));
            }
            chain.push_to_rest(SegmentKind::Brake, -b, v0 / b);
            return Ok(Section1Plan {
                a1: None,
                has_cruise: false,
                v_peak: v0,
                segments: chain.segments,
            });
        }
        Section1Kind::Ramp => {}
    }

    // accelerate v0 -> vp at a1, brake vp -> 0 at b
    let denom = b * t1 - v0;
    if denom > 0.0 {
        let vp = (2.0 * b * d1 - b * v0 * t1) / denom;
        let t_acc = t1 - vp / b;
        if vp > v0 && t_acc > 0.0 && vp <= v_max + V_TOL {
            let a1 = (vp - v0) / t_acc;
            if within_bounds(a1, limits) {
                chain.push(SegmentKind::Accelerate, a1, t_acc);
                chain.v = vp;
                chain.push_to_rest(SegmentKind::Brake, -b, vp / b);
                return Ok(Section1Plan {
                    a1: Some(a1),
                    has_cruise: false,
                    v_peak: vp,
                    segments: chain.segments,
                });
            }
        }
    }

    // accelerate v0 -> v_max, cruise, brake v_max -> 0
    let t_brake = v_max / b;
    let (a1, t_acc) = if v_max - v0 <= V_TOL {
        (None, 0.0)
    } else {
        let t_acc = 2.0 * (v_max * t1 - v_max * v_max / (2.0 * b) - d1) / (v_max - v0);
        if !(t_acc > 0.0) {
            return Err(infeasible("no acceleration stage fits"));
        }
        (Some((v_max - v0) / t_acc), t_acc)
    };
    let mut t_cruise = t1 - t_acc - t_brake;
    if t_cruise < -T_TOL {
        return Err(infeasible("negative cruise duration"));
    }
    t_cruise = t_cruise.max(0.0);
    if let Some(a1) = a1 {
        if !within_bounds(a1, limits) {
            return Err(infeasible(&format!("acceleration {a1:.6} outside bounds")));
        }
        chain.push(SegmentKind::Accelerate, a1, t_acc);
    } else if (v_max * t_cruise + v_max * t_brake / 2.0 - d1).abs() > 1e-6 {
        return Err(infeasible("already at the limit and the distance does not match"));
    }
    chain.v = v_max;
    if t_cruise > 0.0 {
        chain.push(SegmentKind::Cruise, 0.0, t_cruise);
    }
    chain.push_to_rest(SegmentKind::Brake, -b, t_brake);
    Ok(Section1Plan {
        a1,
        has_cruise: true,
        v_peak: v_max,
        segments: chain.segments,
    })
}

/// Picks the arrival instant in `[t_min_arr, t_max_arr]`: `t_min_arr` itself
/// when the light is green then, otherwise the next red-to-green switch.
pub fn choose_arrival(
    signal: &SignalTiming,
    t_min_arr: f64,
    t_max_arr: f64,
) -> Result<f64, PlanError> {
    if signal.is_green(t_min_arr) {
        return Ok(t_min_arr);
    }
    let next_green = signal.next_green_start(t_min_arr);
    if next_green <= t_max_arr + T_TOL {
        Ok(next_green)
    } else {
        Err(PlanError::NoGreen {
            t_min: t_min_arr,
            t_max: t_max_arr,
            next_green,
        })
    }
}

/// Full planning step: section 2 from geometry, the section 1 window from
/// the kinematic limits, the arrival instant from the signal, then section 1
/// solved for the remaining time.
pub fn plan_profile(scenario: &ScenarioSpec) -> Result<SpeedProfile, PlanError> {
    scenario.validate()?;
    let lim = &scenario.limits;
    let d1 = scenario.s_stop - scenario.s0;
    let d2 = scenario.s_int - scenario.s_stop;

    let section2 = section2_plan(d2, lim)?;
    let window = feasible_time_window(scenario.v0, d1, lim)?;
    let fixed = scenario.t0 + scenario.dwell + section2.t2;
    let t_arrival = choose_arrival(&scenario.signal, fixed + window.t_min, fixed + window.t_max)?;
    let t1 = (t_arrival - fixed).clamp(window.t_min, window.t_max);
    let section1 = section1_solve(scenario.v0, d1, t1, lim)?;

    let mut segments: Vec<Segment> = section1
        .segments
        .iter()
        .map(|s| s.shifted(scenario.t0, scenario.s0))
        .collect();
    let (t_stop, s_stop) = segments
        .last()
        .map_or((scenario.t0, scenario.s0), |s| (s.t_end(), s.s_end));
    segments.push(Segment::new(SegmentKind::Dwell, t_stop, s_stop, 0.0, 0.0, scenario.dwell));
    let t_go = t_stop + scenario.dwell;
    segments.extend(section2.segments.iter().map(|s| s.shifted(t_go, s_stop)));

    // section 2 timing is anchored on the chosen arrival, absorbing round-off
    Ok(SpeedProfile {
        class: ProfileClass::from_cruise_flags(section1.has_cruise, section2.has_cruise),
        a1: section1.a1,
        t_arrival,
        segments,
    })
}
