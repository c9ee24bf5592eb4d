use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bglosa_core::telemetry::{load_route, synth_generate, write_telemetry, ScheduledVisit};
use tempfile::TempDir;

fn route_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/route.json")
}

fn bglosa(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bglosa"))
        .arg("--route")
        .arg(route_path())
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn write_log(path: &Path, visits: &[ScheduledVisit], seed: u64) {
    let route = load_route(route_path()).unwrap();
    let samples = synth_generate(&route, visits, seed).unwrap();
    write_telemetry(std::fs::File::create(path).unwrap(), &samples).unwrap();
}

#[test]
fn pipeline_round_trip_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let out = dir.path();
    let o = bglosa(out, &["--seed", "11", "gen", "--days", "3", "--visits-per-day", "30"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let first = read(out.join("telemetry.csv"));
    let o = bglosa(out, &["--seed", "11", "gen", "--days", "3", "--visits-per-day", "30"]);
    assert_eq!(code(&o), 0);
    assert_eq!(first, read(out.join("telemetry.csv")));

    let telemetry = out.join("telemetry.csv");
    assert_eq!(code(&bglosa(out, &["ingest", telemetry.to_str().unwrap()])), 0);
    let samples = out.join("samples.csv");
    assert_eq!(read(&samples).lines().count(), first.lines().count());
    assert_eq!(code(&bglosa(out, &["detect", samples.to_str().unwrap()])), 0);

    let schedule = read(out.join("schedule.csv"));
    let dwells = read(out.join("dwells.csv"));
    let truth: Vec<(String, String, String)> = schedule
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].into(), f[1].into(), f[2].into())
        })
        .collect();
    let found: Vec<(String, String, String)> = dwells
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let d: f64 = f[2].parse().unwrap();
            (f[0].into(), f[1].into(), format!("{d:.1}"))
        })
        .collect();
    assert_eq!(truth.len(), 90);
    assert_eq!(found, truth);

    let dwells = out.join("dwells.csv");
    let o = bglosa(out, &["stats", dwells.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stats = read(out.join("stats.csv"));
    assert_eq!(stats.lines().count(), 1 + 16 * 7);
    // three days cannot fill any cell
    assert!(stats.lines().skip(1).all(|l| l.ends_with(",false")));
}

#[test]
fn detect_drops_long_halts_and_keeps_scheduled_dwells() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("log.csv");
    let t = 1_709_715_600_000;
    write_log(
        &log,
        &[
            ScheduledVisit::new(3, t, 12.0),
            ScheduledVisit::new(5, t + 200_000, 40.0),
            ScheduledVisit::new(7, t + 400_000, 8.0),
            ScheduledVisit::new(9, t + 600_000, 21.5),
        ],
        4,
    );
    let o = bglosa(dir.path(), &["detect", log.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows: Vec<String> = read(dir.path().join("dwells.csv")).lines().skip(1).map(String::from).collect();
    let stops: Vec<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(stops, ["3", "7", "9"]);
}

#[test]
fn detect_empty_log_writes_header() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("empty.csv");
    std::fs::write(&log, "t_ms,lat,lon,s_m,speed_mps,door1,door2,door3,door4\n").unwrap();
    assert_eq!(code(&bglosa(dir.path(), &["detect", log.to_str().unwrap()])), 0);
    assert_eq!(read(dir.path().join("dwells.csv")), "stop_id,t_start_ms,duration_s,n_samples\n");
}

#[test]
fn ingest_projects_lat_lon_rows() {
    let dir = TempDir::new().unwrap();
    let route = load_route(route_path()).unwrap();
    let mut text = String::from("t_ms,lat,lon,s_m,speed_mps,door1,door2,door3,door4\n");
    let positions = [150.0, 1999.0, 2300.0, 5123.4];
    for (k, s) in positions.iter().enumerate() {
        let p = route.path.point_at(*s);
        text.push_str(&format!("{},{:.8},{:.8},,5.0,0,0,0,0\n", 1000 * k, p.lat, p.lon));
    }
    let log = dir.path().join("fixes.csv");
    std::fs::write(&log, text).unwrap();
    let o = bglosa(dir.path(), &["ingest", log.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = read(dir.path().join("samples.csv"));
    let got: Vec<f64> = out.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    for (g, want) in got.iter().zip(positions) {
        assert!((g - want).abs() < 0.01, "{g} vs {want}");
    }
}

#[test]
fn ingest_rejects_overlapping_files() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let t = 1_709_715_600_000;
    write_log(&a, &[ScheduledVisit::new(3, t, 12.0)], 1);
    write_log(&b, &[ScheduledVisit::new(4, t + 10_000, 12.0)], 2);
    let o = bglosa(dir.path(), &["ingest", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("overlap"));
}

#[test]
fn malformed_log_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("bad.csv");
    std::fs::write(&log, "t_ms,lat,lon,s_m,speed_mps,door1,door2,door3,door4\n0,,,12,fast,0,0,0,0\n").unwrap();
    let o = bglosa(dir.path(), &["detect", log.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn plan_worked_scenario() {
    let dir = TempDir::new().unwrap();
    let o = bglosa(dir.path(), &["plan", "--stop-id", "10", "--s0", "3650", "--at", "2024-03-06T12:00"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("class P2"));
    let plan: serde_json::Value = serde_json::from_str(&read(dir.path().join("plan.json"))).unwrap();
    assert_eq!(plan["profile"]["class"], "P2");
    assert_eq!(plan["profile"]["t_arrival"], 60.0);
    assert_eq!(plan["scenario"]["dwell"], 16.0);
    assert_eq!(plan["intersection_id"], 2);
}

#[test]
fn plan_exit_codes() {
    let dir = TempDir::new().unwrap();
    // already at the stop: the only arrival is 30.6 s, inside red
    let o = bglosa(dir.path(), &["plan", "--stop-id", "10", "--s0", "3800", "--dwell", "16"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("feasible arrival window"), "{}", stderr(&o));
    // too fast to stop in 10 m
    let o = bglosa(dir.path(), &["plan", "--stop-id", "10", "--s0", "3790", "--v0", "8", "--dwell", "16"]);
    assert_eq!(code(&o), 2);

    let o = bglosa(dir.path(), &["plan", "--stop-id", "99", "--s0", "0", "--dwell", "16"]);
    assert_eq!(code(&o), 1);
    let o = bglosa(dir.path(), &["plan", "--frobnicate"]);
    assert_eq!(code(&o), 1);
    let o = bglosa(dir.path(), &["plan", "--stop-id", "10", "--s0", "3650"]);
    assert_eq!(code(&o), 1);
    let o = bglosa(dir.path(), &["--timezone", "Nowhere/Special", "plan", "--stop-id", "10", "--s0", "3650", "--dwell", "5"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn simulate_side_by_side() {
    let dir = TempDir::new().unwrap();
    let o = bglosa(dir.path(), &["plan", "--stop-id", "10", "--s0", "3650", "--dwell", "16"]);
    assert_eq!(code(&o), 0);
    let plan = dir.path().join("plan.json");
    let o = bglosa(dir.path(), &["simulate", "--plan", plan.to_str().unwrap(), "--baseline"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("planner") && table.contains("baseline"));

    let lines: Vec<serde_json::Value> = read(dir.path().join("metrics.jsonl"))
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["driver"], "planner");
    assert_eq!(lines[0]["stops_at_red"], 0);
    assert_eq!(lines[0]["arrival_signal_state"], "green");
    assert!(lines[0]["arrival_error_s"].as_f64().unwrap() < 1e-6);
    assert_eq!(lines[1]["driver"], "baseline");
    assert_eq!(lines[1]["stops_at_red"], 1);

    let traj = read(dir.path().join("trajectory.csv"));
    assert_eq!(traj.lines().next(), Some("t_s,s_m,v_mps,a_mps2"));
    let last: Vec<f64> = traj.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((last[0] - 60.0).abs() < 1e-3 && (last[1] - 3900.0).abs() < 1e-3);
}

#[test]
fn simulate_from_flags_and_baseline_only_when_infeasible() {
    let dir = TempDir::new().unwrap();
    let o = bglosa(dir.path(), &["simulate", "--stop-id", "10", "--s0", "3650", "--dwell", "16"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read(dir.path().join("metrics.jsonl")).lines().count(), 1);

    let o = bglosa(dir.path(), &["simulate", "--stop-id", "10", "--s0", "3800", "--dwell", "16", "--baseline"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("baseline only"));
    let metrics = read(dir.path().join("metrics.jsonl"));
    assert!(metrics.starts_with("{\"driver\":\"baseline\""));
}

#[test]
fn config_file_supplies_route_and_output() {
    let dir = TempDir::new().unwrap();
    std::fs::copy(route_path(), dir.path().join("route.json")).unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "route = \"route.json\"\nout = \"results\"\n[limits]\nv_max_mps = 10.0\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_bglosa"))
        .arg("--config")
        .arg(&cfg)
        .args(["plan", "--stop-id", "10", "--s0", "3650", "--dwell", "16"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let plan: serde_json::Value = serde_json::from_str(&read(dir.path().join("results/plan.json"))).unwrap();
    assert_eq!(plan["scenario"]["limits"]["v_max"], 10.0);
}
