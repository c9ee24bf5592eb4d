use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use bglosa_core::dwell_stats::{
    assign_cluster, build_stats_table, fixture_table, read_stats_table, write_stats_table,
    StatsError, StatsTable, DEFAULT_DWELL_S,
};
use bglosa_core::gev::FitOptions;
use bglosa_core::planner::{feasible_time_window, plan_profile, section2_plan, PlanError, ScenarioSpec, SpeedProfile};
use bglosa_core::simulator::{baseline_driver, evaluate, rollout, write_trajectory, SimMetrics};
use bglosa_core::stop_detection::{detect_dwells, read_dwell_events, write_dwell_events, DetectionError};
use bglosa_core::telemetry::{
    load_route, parse_telemetry, synth_generate, write_telemetry, RouteModel, ScheduledVisit,
    TelemetrySample,
};
use chrono::{NaiveDate, NaiveDateTime, TimeZone};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{Failure, GenArgs, ScenarioArgs, SimulateArgs};

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(Failure::usage)?;
    }
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, bytes)
        .and_then(|_| std::fs::rename(&tmp, path))
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::data)
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(Failure::data)
}

fn route(cfg: &RunConfig) -> Result<RouteModel, Failure> {
    let path = cfg
        .route
        .as_ref()
        .ok_or_else(|| Failure::usage(anyhow!("a route file is required (--route or config)")))?;
    let mut route = load_route(path)
        .with_context(|| format!("loading route {}", path.display()))
        .map_err(Failure::usage)?;
    route.limits = cfg.limits.apply(route.limits).map_err(Failure::usage)?;
    Ok(route)
}

fn detection_failure(e: DetectionError) -> Failure {
    match e {
        DetectionError::InvalidParams(_) | DetectionError::StopsTooClose { .. } => Failure::usage(e),
        _ => Failure::data(e),
    }
}

pub fn ingest(cfg: &RunConfig, files: &[PathBuf]) -> Result<(), Failure> {
    let mut logs: Vec<(PathBuf, Vec<TelemetrySample>)> = Vec::new();
    for path in files {
        let samples = parse_telemetry(open(path)?)
            .with_context(|| format!("parsing {}", path.display()))
            .map_err(Failure::data)?;
        if !samples.is_empty() {
            logs.push((path.clone(), samples));
        }
    }
    logs.sort_by_key(|(_, s)| s[0].t_ms);
    for w in logs.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.1.last().unwrap().t_ms >= b.1[0].t_ms {
            return Err(Failure::data(anyhow!(
                "time ranges of {} and {} overlap",
                a.0.display(),
                b.0.display()
            )));
        }
    }
    let mut merged: Vec<TelemetrySample> = logs.into_iter().flat_map(|(_, s)| s).collect();
    if merged.iter().any(|s| s.s_m.is_none()) {
        let route = route(cfg)?;
        for s in &mut merged {
            s.s_m = s.path_position(&route.path);
        }
    }
    let mut buf = Vec::new();
    write_telemetry(&mut buf, &merged).map_err(Failure::data)?;
    let out = cfg.out.join("samples.csv");
    write_atomic(&out, &buf)?;
    println!("{} samples from {} files -> {}", merged.len(), files.len(), out.display());
    Ok(())
}

pub fn detect(cfg: &RunConfig, input: &Path) -> Result<(), Failure> {
    let route = route(cfg)?;
    let samples = parse_telemetry(open(input)?)
        .with_context(|| format!("parsing {}", input.display()))
        .map_err(Failure::data)?;
    let events = detect_dwells(&samples, &route, &cfg.detection).map_err(detection_failure)?;
    let mut buf = Vec::new();
    write_dwell_events(&mut buf, &events).map_err(Failure::data)?;
    let out = cfg.out.join("dwells.csv");
    write_atomic(&out, &buf)?;
    println!("{} dwell events -> {}", events.len(), out.display());
    Ok(())
}

pub fn stats(cfg: &RunConfig, input: &Path) -> Result<(), Failure> {
    let route = route(cfg)?;
    let events = read_dwell_events(open(input)?)
        .with_context(|| format!("parsing {}", input.display()))
        .map_err(Failure::data)?;
    let opts = FitOptions {
        min_samples: cfg.min_samples,
        ..FitOptions::default()
    };
    let table = build_stats_table(&events, &route, cfg.timezone, &opts).map_err(Failure::data)?;
    let mut buf = Vec::new();
    write_stats_table(&mut buf, &table).map_err(Failure::data)?;
    let out = cfg.out.join("stats.csv");
    write_atomic(&out, &buf)?;
    let reliable = table.cells.iter().filter(|c| c.reliable).count();
    println!(
        "{} events, {} cells ({reliable} reliable) -> {}",
        events.len(),
        table.cells.len(),
        out.display()
    );
    Ok(())
}

fn stats_table(path: Option<&PathBuf>) -> Result<StatsTable, Failure> {
    match path {
        Some(p) => read_stats_table(open(p)?)
            .with_context(|| format!("parsing {}", p.display()))
            .map_err(Failure::data),
        None => Ok(fixture_table()),
    }
}

fn parse_local(text: &str) -> Result<NaiveDateTime, Failure> {
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(text, f).ok())
        .ok_or_else(|| Failure::usage(anyhow!("cannot read {text:?} as a local date and time")))
}

/// A planned scenario as stored on disk.
#[derive(Debug, Serialize, Deserialize)]
pub struct PlanFile {
    pub stop_id: u32,
    pub intersection_id: u32,
    pub dwell_source: String,
    pub scenario: ScenarioSpec,
    pub profile: SpeedProfile,
}

struct Scenario {
    spec: ScenarioSpec,
    stop_id: u32,
    intersection_id: u32,
    dwell_source: String,
}

fn build_scenario(cfg: &RunConfig, args: &ScenarioArgs) -> Result<Scenario, Failure> {
    let route = route(cfg)?;
    let stop_id = args
        .stop_id
        .ok_or_else(|| Failure::usage(anyhow!("--stop-id is required")))?;
    let stop = route
        .stop(stop_id)
        .ok_or_else(|| Failure::usage(anyhow!("unknown stop id {stop_id}")))?;
    let intersection = match args.intersection_id {
        Some(id) => route
            .intersection(id)
            .ok_or_else(|| Failure::usage(anyhow!("unknown intersection id {id}")))?,
        None => route
            .intersections
            .iter()
            .find(|i| i.s_m > stop.s_m)
            .ok_or_else(|| Failure::usage(anyhow!("no intersection after stop {stop_id}")))?,
    };
    let s0 = args
        .s0
        .ok_or_else(|| Failure::usage(anyhow!("--s0 is required")))?;
    let (dwell, dwell_source) = match (args.dwell, &args.at) {
        (Some(d), _) => (d, "fixed".to_string()),
        (None, Some(at)) => {
            let local = parse_local(at)?;
            let table = stats_table(args.stats.as_ref())?;
            let dwell = table.lookup_dwell(stop_id, &local).map_err(|e| match e {
                StatsError::UnknownStop(_) => Failure::usage(e),
                other => Failure::data(other),
            })?;
            let cluster = assign_cluster(&local);
            let source = match table.cell(stop_id, cluster).filter(|c| c.reliable) {
                Some(_) => format!("stop {stop_id} {cluster}"),
                None if table.grand_mean(cluster).is_some() => format!("{cluster} mean over stops"),
                None => format!("default {DEFAULT_DWELL_S} s"),
            };
            (dwell, source)
        }
        (None, None) => return Err(Failure::usage(anyhow!("give --at for a statistics lookup or a fixed --dwell"))),
    };
    let spec = ScenarioSpec {
        s0,
        v0: args.v0,
        s_stop: stop.s_m,
        dwell,
        s_int: intersection.s_m,
        signal: intersection.timing,
        t0: args.t0,
        limits: route.limits,
    };
    Ok(Scenario {
        spec,
        stop_id,
        intersection_id: intersection.id,
        dwell_source,
    })
}

fn plan_failure(e: PlanError) -> Failure {
    match e {
        PlanError::InvalidScenario(_) | PlanError::NonPositiveDistance(_) => Failure::usage(e),
        PlanError::NoGreen { t_min, t_max, next_green } => Failure::infeasible(anyhow!(
            "no green reachable: feasible arrival window [{t_min:.3}, {t_max:.3}] s, next green starts at {next_green:.3} s"
        )),
        PlanError::Overrun { .. } | PlanError::Infeasible { .. } => Failure::infeasible(e),
    }
}

fn make_plan(cfg: &RunConfig, args: &ScenarioArgs) -> Result<PlanFile, Failure> {
    let sc = build_scenario(cfg, args)?;
    let profile = plan_profile(&sc.spec).map_err(|e| plan_failure(e))?;
    Ok(PlanFile {
        stop_id: sc.stop_id,
        intersection_id: sc.intersection_id,
        dwell_source: sc.dwell_source,
        scenario: sc.spec,
        profile,
    })
}

fn summary(plan: &PlanFile) -> String {
    let sc = &plan.scenario;
    let p = &plan.profile;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "stop {} at {:.1} m, dwell {:.1} s ({})",
        plan.stop_id, sc.s_stop, sc.dwell, plan.dwell_source
    );
    if let (Ok(w), Ok(s2)) = (
        feasible_time_window(sc.v0, sc.s_stop - sc.s0, &sc.limits),
        section2_plan(sc.s_int - sc.s_stop, &sc.limits),
    ) {
        let fixed = sc.t0 + sc.dwell + s2.t2;
        let _ = writeln!(
            text,
            "intersection {} at {:.1} m, reachable in [{:.3}, {:.3}] s",
            plan.intersection_id,
            sc.s_int,
            fixed + w.t_min,
            fixed + w.t_max
        );
    }
    let a1 = p.a1.map_or("-".to_string(), |a| format!("{a:.4} m/s2"));
    let _ = writeln!(text, "class {}, arrival {:.3} s, a1 {a1}", p.class, p.t_arrival);
    for s in &p.segments {
        let _ = writeln!(
            text,
            "  {:<10} t {:>9.3} .. {:>9.3} s  s {:>9.2} .. {:>9.2} m  v {:>6.3} .. {:>6.3} m/s",
            format!("{:?}", s.kind).to_lowercase(),
            s.t_start,
            s.t_end(),
            s.s_start,
            s.s_end,
            s.v_start,
            s.v_end
        );
    }
    text
}

pub fn plan(cfg: &RunConfig, args: &ScenarioArgs) -> Result<(), Failure> {
    let plan = make_plan(cfg, args)?;
    let json = serde_json::to_string_pretty(&plan).expect("plan serializes");
    let out = cfg.out.join("plan.json");
    write_atomic(&out, format!("{json}\n").as_bytes())?;
    print!("{}", summary(&plan));
    println!("plan -> {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct MetricsRecord<'a> {
    driver: &'a str,
    #[serde(flatten)]
    metrics: &'a SimMetrics,
}

fn side_by_side(rows: &[(&str, &SimMetrics)]) -> String {
    let mut text = format!("{:<22}", "metric");
    for (name, _) in rows {
        let _ = write!(text, "{name:>12}");
    }
    text.push('\n');
    let fields: [(&str, fn(&SimMetrics) -> String); 7] = [
        ("travel_time_s", |m| format!("{:.3}", m.travel_time)),
        ("arrival_s", |m| format!("{:.3}", m.t_arrival)),
        ("arrival_signal", |m| format!("{:?}", m.arrival_signal_state).to_lowercase()),
        ("stops_at_red", |m| m.stops_at_red.to_string()),
        ("red_wait_s", |m| format!("{:.3}", m.red_wait)),
        ("max_accel_mps2", |m| format!("{:.3}", m.max_accel)),
        ("max_decel_mps2", |m| format!("{:.3}", m.max_decel)),
    ];
    for (label, f) in fields {
        let _ = write!(text, "{label:<22}");
        for (_, m) in rows {
            let _ = write!(text, "{:>12}", f(m));
        }
        text.push('\n');
    }
    text
}

pub fn simulate(cfg: &RunConfig, args: &SimulateArgs) -> Result<(), Failure> {
    if !(args.dt > 0.0 && args.dt.is_finite()) {
        return Err(Failure::usage(anyhow!("--dt must be positive")));
    }
    // a scenario that cannot be planned can still be driven by the baseline
    let (scenario, plan) = match &args.plan {
        Some(path) => {
            let plan: PlanFile = serde_json::from_reader(open(path)?)
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(Failure::data)?;
            plan.profile
                .check(&plan.scenario, 1e-6)
                .map_err(|e| Failure::data(anyhow!("plan file {} is inconsistent: {e}", path.display())))?;
            (plan.scenario, Some(plan))
        }
        None => match make_plan(cfg, &args.scenario) {
            Ok(plan) => (plan.scenario, Some(plan)),
            Err(f) if f.code == 2 && args.baseline => {
                eprintln!("warning: {:#}; running the baseline only", f.error);
                (build_scenario(cfg, &args.scenario)?.spec, None)
            }
            Err(f) => return Err(f),
        },
    };

    let mut rows: Vec<(&str, SimMetrics)> = Vec::new();
    if let Some(plan) = &plan {
        let traj = rollout(&plan.profile, args.dt).map_err(Failure::data)?;
        let m = evaluate(&traj, &scenario, Some(plan.profile.t_arrival)).map_err(Failure::data)?;
        let mut buf = Vec::new();
        write_trajectory(&traj, &mut buf).map_err(Failure::data)?;
        write_atomic(&cfg.out.join("trajectory.csv"), &buf)?;
        rows.push(("planner", m));
    }
    if args.baseline {
        let traj = baseline_driver(&scenario, args.dt).map_err(|e| match e {
            bglosa_core::simulator::SimError::Plan(p) => plan_failure(p),
            other => Failure::data(other),
        })?;
        let m = evaluate(&traj, &scenario, None).map_err(Failure::data)?;
        let mut buf = Vec::new();
        write_trajectory(&traj, &mut buf).map_err(Failure::data)?;
        write_atomic(&cfg.out.join("baseline_trajectory.csv"), &buf)?;
        rows.push(("baseline", m));
    }

    let mut lines = String::new();
    for (driver, metrics) in &rows {
        let record = MetricsRecord { driver, metrics };
        lines.push_str(&serde_json::to_string(&record).expect("metrics serialize"));
        lines.push('\n');
    }
    write_atomic(&cfg.out.join("metrics.jsonl"), lines.as_bytes())?;
    let view: Vec<(&str, &SimMetrics)> = rows.iter().map(|(n, m)| (*n, m)).collect();
    print!("{}", side_by_side(&view));
    Ok(())
}

pub fn gen(cfg: &RunConfig, args: &GenArgs) -> Result<(), Failure> {
    let route = route(cfg)?;
    let table = stats_table(args.stats.as_ref())?;
    let start = NaiveDate::parse_from_str(&args.start, "%Y-%m-%d")
        .map_err(|e| Failure::usage(anyhow!("--start {:?}: {e}", args.start)))?;
    // 5-minute slots from 06:00 to 22:55 keep episodes apart
    let slots: Vec<u32> = (6 * 60..23 * 60).step_by(5).collect();
    if args.visits_per_day > slots.len() {
        return Err(Failure::usage(anyhow!("at most {} visits per day", slots.len())));
    }
    let (lo, hi) = (cfg.detection.min_dwell, cfg.detection.max_dwell);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut schedule_all: Vec<ScheduledVisit> = Vec::new();
    let mut samples_all: Vec<TelemetrySample> = Vec::new();
    for (day_index, day) in start.iter_days().take(args.days as usize).enumerate() {
        let mut day_slots = slots.clone();
        let mut schedule = Vec::new();
        for _ in 0..args.visits_per_day {
            let minute = day_slots.swap_remove(rng.gen_range(0..day_slots.len()));
            let local = day.and_hms_opt(minute / 60, minute % 60, 0).expect("valid time");
            let Some(t) = cfg.timezone.from_local_datetime(&local).single() else {
                continue;
            };
            let stop = &route.stops[rng.gen_range(0..route.stops.len())];
            let cell = table
                .cell(stop.id, assign_cluster(&local))
                .filter(|c| c.reliable)
                .and_then(|c| c.params);
            let dwell = match cell {
                Some(p) => (0..100)
                    .map(|_| p.quantile(rng.gen_range(f64::EPSILON..1.0)))
                    .find(|d| (lo..=hi).contains(d))
                    .unwrap_or(p.loc.clamp(lo, hi)),
                None => table.lookup_dwell(stop.id, &local).unwrap_or(DEFAULT_DWELL_S),
            };
            let dwell = ((dwell * 10.0).round() / 10.0).clamp(lo, hi);
            schedule.push(ScheduledVisit::new(stop.id, t.timestamp_millis(), dwell));
        }
        schedule.sort_by_key(|v| v.t_start_ms);
        if schedule.is_empty() {
            continue;
        }
        let samples = synth_generate(&route, &schedule, cfg.seed.wrapping_add(day_index as u64 + 1))
            .map_err(Failure::data)?;
        samples_all.extend(samples);
        schedule_all.extend(schedule);
    }

    let mut buf = Vec::new();
    write_telemetry(&mut buf, &samples_all).map_err(Failure::data)?;
    write_atomic(&cfg.out.join("telemetry.csv"), &buf)?;
    let mut truth = String::from("stop_id,t_start_ms,duration_s\n");
    for v in &schedule_all {
        let _ = writeln!(truth, "{},{},{:.1}", v.stop_id, v.t_start_ms, v.duration_s);
    }
    write_atomic(&cfg.out.join("schedule.csv"), truth.as_bytes())?;
    println!(
        "{} visits, {} samples -> {}",
        schedule_all.len(),
        samples_all.len(),
        cfg.out.join("telemetry.csv").display()
    );
    Ok(())
}
