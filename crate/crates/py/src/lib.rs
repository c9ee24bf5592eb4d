//! Python bindings: GEV fitting, dwell statistics lookup, speed profile
//! planning and rollout.

use bglosa_core::dwell_stats::{self, StatsTable};
use bglosa_core::gev::{self, FitOptions};
use bglosa_core::planner::{self, ScenarioSpec, SpeedProfile};
use bglosa_core::simulator::{self, SimMetrics, Trajectory};
use bglosa_core::stop_detection::{self, DetectionParams};
use bglosa_core::telemetry::{self, KinematicLimits, RouteModel, SignalTiming};
use chrono::NaiveDateTime;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(bglosa, PlanError, PyException, "No feasible speed profile for the scenario.");

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn plan_err(e: planner::PlanError) -> PyErr {
    match e {
        planner::PlanError::InvalidScenario(_) | planner::PlanError::NonPositiveDistance(_) => value_err(e),
        other => PlanError::new_err(other.to_string()),
    }
}

#[pyclass(name = "GevParams", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyGevParams(gev::GevParams);

#[pymethods]
impl PyGevParams {
    #[new]
    fn new(shape: f64, loc: f64, scale: f64) -> PyResult<Self> {
        gev::GevParams::new(shape, loc, scale).map(Self).map_err(value_err)
    }

    #[getter]
    fn shape(&self) -> f64 {
        self.0.shape
    }

    #[getter]
    fn loc(&self) -> f64 {
        self.0.loc
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.0.scale
    }

    fn pdf(&self, x: f64) -> f64 {
        self.0.pdf(x)
    }

    fn cdf(&self, x: f64) -> f64 {
        self.0.cdf(x)
    }

    fn quantile(&self, u: f64) -> PyResult<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(value_err(format!("quantile level {u} outside (0, 1)")));
        }
        Ok(self.0.quantile(u))
    }

    /// `(mean, std)`; raises when a moment does not exist.
    fn moments(&self) -> PyResult<(f64, f64)> {
        self.0.moments().map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("GevParams(shape={}, loc={}, scale={})", self.0.shape, self.0.loc, self.0.scale)
    }
}

#[pyfunction]
fn gev_loglik(samples: Vec<f64>, params: &PyGevParams) -> PyResult<f64> {
    gev::gev_loglik(&samples, &params.0).map_err(value_err)
}

/// Maximum-likelihood fit; returns the parameters and a report dict.
#[pyfunction]
#[pyo3(signature = (samples, min_samples = 20))]
fn gev_fit<'py>(py: Python<'py>, samples: Vec<f64>, min_samples: usize) -> PyResult<(PyGevParams, Bound<'py, PyDict>)> {
    let opts = FitOptions {
        min_samples,
        ..FitOptions::default()
    };
    let fit = gev::gev_fit_mle(&samples, &opts).map_err(value_err)?;
    let report = PyDict::new(py);
    report.set_item("loglik", fit.report.loglik)?;
    report.set_item("iterations", fit.report.iterations)?;
    report.set_item("converged", fit.report.converged)?;
    Ok((PyGevParams(fit.params), report))
}

#[pyfunction]
fn assign_cluster(local: NaiveDateTime) -> &'static str {
    dwell_stats::assign_cluster(&local).as_str()
}

#[pyclass(name = "StatsTable", frozen)]
struct PyStatsTable(StatsTable);

#[pymethods]
impl PyStatsTable {
    /// The built-in published table for the 16-stop reference route.
    #[staticmethod]
    fn published() -> Self {
        Self(dwell_stats::fixture_table())
    }

    #[staticmethod]
    fn read_csv(path: std::path::PathBuf) -> PyResult<Self> {
        let file = std::fs::File::open(&path).map_err(value_err)?;
        dwell_stats::read_stats_table(file).map(Self).map_err(value_err)
    }

    fn lookup_dwell(&self, stop_id: u32, local: NaiveDateTime) -> PyResult<f64> {
        self.0.lookup_dwell(stop_id, &local).map_err(value_err)
    }

    /// `(n, mean, std, reliable)` for one cell.
    fn cell(&self, stop_id: u32, cluster: &str) -> PyResult<(usize, Option<f64>, Option<f64>, bool)> {
        let cluster: dwell_stats::ClusterId = cluster.parse().map_err(value_err)?;
        let c = self
            .0
            .cell(stop_id, cluster)
            .ok_or_else(|| value_err(format!("no cell for stop {stop_id} {cluster}")))?;
        Ok((c.n, c.mean, c.std, c.reliable))
    }

    fn __len__(&self) -> usize {
        self.0.cells.len()
    }
}

#[pyclass(name = "Route", frozen)]
struct PyRoute(RouteModel);

#[pymethods]
impl PyRoute {
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        telemetry::load_route(path).map(Self).map_err(value_err)
    }

    /// `[(id, name, s_m), ...]`
    fn stops(&self) -> Vec<(u32, String, f64)> {
        self.0.stops.iter().map(|s| (s.id, s.name.clone(), s.s_m)).collect()
    }

    #[getter]
    fn length(&self) -> f64 {
        self.0.path.length()
    }

    /// Detects dwells in a telemetry CSV; returns `[(stop_id, t_start_ms, duration_s), ...]`.
    fn detect_dwells(&self, telemetry_csv: std::path::PathBuf) -> PyResult<Vec<(u32, i64, f64)>> {
        let file = std::fs::File::open(&telemetry_csv).map_err(value_err)?;
        let samples = telemetry::parse_telemetry(file).map_err(value_err)?;
        let events = stop_detection::detect_dwells(&samples, &self.0, &DetectionParams::default()).map_err(value_err)?;
        Ok(events.iter().map(|e| (e.stop_id, e.t_start_ms, e.duration_s)).collect())
    }
}

#[pyclass(name = "Scenario", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyScenario(ScenarioSpec);

#[pymethods]
impl PyScenario {
    /// Signal green intervals are `[k*cycle + green_start, ... + green_duration)`.
    #[new]
    #[pyo3(signature = (s0, v0, s_stop, dwell, s_int, cycle, green_start, green_duration, t0 = 0.0, v_max = None, brake = None, a2 = None, a1_max = None, a1_min = None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        s0: f64,
        v0: f64,
        s_stop: f64,
        dwell: f64,
        s_int: f64,
        cycle: f64,
        green_start: f64,
        green_duration: f64,
        t0: f64,
        v_max: Option<f64>,
        brake: Option<f64>,
        a2: Option<f64>,
        a1_max: Option<f64>,
        a1_min: Option<f64>,
    ) -> PyResult<Self> {
        let d = KinematicLimits::default();
        let spec = ScenarioSpec {
            s0,
            v0,
            s_stop,
            dwell,
            s_int,
            signal: SignalTiming::new(cycle, green_start, green_duration).map_err(value_err)?,
            t0,
            limits: KinematicLimits {
                v_max: v_max.unwrap_or(d.v_max),
                brake: brake.unwrap_or(d.brake),
                a2: a2.unwrap_or(d.a2),
                a1_max: a1_max.unwrap_or(d.a1_max),
                a1_min: a1_min.unwrap_or(d.a1_min),
            },
        };
        spec.validate().map_err(value_err)?;
        Ok(Self(spec))
    }

    fn is_green(&self, t: f64) -> bool {
        self.0.signal.is_green(t)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

#[pyclass(name = "SpeedProfile", frozen)]
struct PySpeedProfile(SpeedProfile);

#[pymethods]
impl PySpeedProfile {
    #[getter]
    fn class_name(&self) -> String {
        self.0.class.to_string()
    }

    #[getter]
    fn a1(&self) -> Option<f64> {
        self.0.a1
    }

    #[getter]
    fn t_arrival(&self) -> f64 {
        self.0.t_arrival
    }

    /// `[(kind, t_start, duration, a, v_start, v_end, s_start, s_end), ...]`
    fn segments(&self) -> Vec<(String, f64, f64, f64, f64, f64, f64, f64)> {
        self.0
            .segments
            .iter()
            .map(|s| {
                (
                    format!("{:?}", s.kind).to_lowercase(),
                    s.t_start,
                    s.duration,
                    s.a,
                    s.v_start,
                    s.v_end,
                    s.s_start,
                    s.s_end,
                )
            })
            .collect()
    }

    /// `(s, v, a)` at time `t`.
    fn state_at(&self, t: f64) -> (f64, f64, f64) {
        self.0.state_at(t)
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("profile serializes")
    }
}

#[pyfunction]
fn plan_profile(scenario: &PyScenario) -> PyResult<PySpeedProfile> {
    planner::plan_profile(&scenario.0).map(PySpeedProfile).map_err(plan_err)
}

#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory(Trajectory);

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn dt(&self) -> f64 {
        self.0.dt
    }

    /// `[(t, s, v, a), ...]`
    fn samples(&self) -> Vec<(f64, f64, f64, f64)> {
        self.0.samples.iter().map(|p| (p.t, p.s, p.v, p.a)).collect()
    }

    fn __len__(&self) -> usize {
        self.0.samples.len()
    }
}

#[pyfunction]
#[pyo3(signature = (profile, dt = simulator::DEFAULT_DT))]
fn rollout(profile: &PySpeedProfile, dt: f64) -> PyResult<PyTrajectory> {
    simulator::rollout(&profile.0, dt).map(PyTrajectory).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (scenario, dt = simulator::DEFAULT_DT))]
fn baseline_driver(scenario: &PyScenario, dt: f64) -> PyResult<PyTrajectory> {
    simulator::baseline_driver(&scenario.0, dt)
        .map(PyTrajectory)
        .map_err(|e| match e {
            simulator::SimError::Plan(p) => plan_err(p),
            other => value_err(other),
        })
}

fn metrics_dict<'py>(py: Python<'py>, m: &SimMetrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("travel_time", m.travel_time)?;
    d.set_item("t_arrival", m.t_arrival)?;
    d.set_item("stops_at_red", m.stops_at_red)?;
    d.set_item("red_wait", m.red_wait)?;
    let state = match m.arrival_signal_state {
        simulator::SignalState::Green => "green",
        simulator::SignalState::Red => "red",
    };
    d.set_item("arrival_signal_state", state)?;
    d.set_item("max_accel", m.max_accel)?;
    d.set_item("max_decel", m.max_decel)?;
    d.set_item("arrival_error_s", m.arrival_error_s)?;
    d.set_item("arrival_error_m", m.arrival_error_m)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (trajectory, scenario, declared_arrival = None))]
fn evaluate<'py>(
    py: Python<'py>,
    trajectory: &PyTrajectory,
    scenario: &PyScenario,
    declared_arrival: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let m = simulator::evaluate(&trajectory.0, &scenario.0, declared_arrival).map_err(value_err)?;
    metrics_dict(py, &m)
}

#[pymodule]
fn bglosa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PlanError", m.py().get_type::<PlanError>())?;
    m.add_class::<PyGevParams>()?;
    m.add_class::<PyStatsTable>()?;
    m.add_class::<PyRoute>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PySpeedProfile>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(gev_loglik, m)?)?;
    m.add_function(wrap_pyfunction!(gev_fit, m)?)?;
    m.add_function(wrap_pyfunction!(assign_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(plan_profile, m)?)?;
    m.add_function(wrap_pyfunction!(rollout, m)?)?;
    m.add_function(wrap_pyfunction!(baseline_driver, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
