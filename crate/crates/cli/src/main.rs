//! `bglosa`: file-based pipeline from raw telemetry to dwell statistics,
//! speed profile plans and their simulated validation.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 infeasible plan,
//! 3 data error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "bglosa", version, about = "Bus dwell statistics and green-light speed advisory")]
struct Cli {
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Route description (JSON).
    #[arg(long, global = true)]
    route: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// IANA timezone used for clustering local times.
    #[arg(long, global = true)]
    timezone: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Merge telemetry logs into one time-sorted, path-projected file.
    Ingest {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Detect door-open dwells at the route's stops.
    Detect { samples: PathBuf },
    /// Fit dwell statistics per stop and cluster.
    Stats { dwells: PathBuf },
    /// Plan the speed profile through a stop to the next signal.
    Plan(ScenarioArgs),
    /// Roll out a plan (or a scenario) and report arrival metrics.
    Simulate(SimulateArgs),
    /// Generate a synthetic telemetry log with its ground-truth schedule.
    Gen(GenArgs),
}

#[derive(Debug, Args, Clone)]
pub struct ScenarioArgs {
    #[arg(long)]
    stop_id: Option<u32>,
    /// Start position along the path, meters.
    #[arg(long)]
    s0: Option<f64>,
    /// Start speed, m/s.
    #[arg(long, default_value_t = 0.0)]
    v0: f64,
    /// Defaults to the first intersection after the stop.
    #[arg(long)]
    intersection_id: Option<u32>,
    /// Local date and time used to pick the dwell cluster, e.g. 2024-03-06T12:00.
    #[arg(long)]
    at: Option<String>,
    /// Fixed dwell in seconds instead of the statistics lookup.
    #[arg(long)]
    dwell: Option<f64>,
    /// Current time on the signal clock, seconds.
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    /// Statistics table CSV; the built-in published table when absent.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Plan file written by `plan`; otherwise the scenario flags are planned first.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Also run the uninformed baseline driver.
    #[arg(long)]
    baseline: bool,
    /// Sampling step, seconds.
    #[arg(long, default_value_t = bglosa_core::simulator::DEFAULT_DT)]
    dt: f64,
    #[command(flatten)]
    scenario: ScenarioArgs,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// First local day, YYYY-MM-DD.
    #[arg(long, default_value = "2024-03-04")]
    start: String,
    #[arg(long, default_value_t = 1)]
    days: u32,
    #[arg(long, default_value_t = 40)]
    visits_per_day: usize,
    /// Statistics table CSV used to draw dwell durations.
    #[arg(long)]
    stats: Option<PathBuf>,
}

/// A failure with its exit code.
pub struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 1, error: error.into() }
    }

    pub fn infeasible(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, error: error.into() }
    }

    pub fn data(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 3, error: error.into() }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = RunConfig::resolve(Overrides {
        config: cli.config,
        route: cli.route,
        out: cli.out,
        seed: cli.seed,
        timezone: cli.timezone,
    })
    .map_err(Failure::usage)?;
    match cli.command {
        Command::Ingest { files } => commands::ingest(&cfg, &files),
        Command::Detect { samples } => commands::detect(&cfg, &samples),
        Command::Stats { dwells } => commands::stats(&cfg, &dwells),
        Command::Plan(args) => commands::plan(&cfg, &args),
        Command::Simulate(args) => commands::simulate(&cfg, &args),
        Command::Gen(args) => commands::gen(&cfg, &args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
