//! Run configuration: an optional TOML file merged under command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bglosa_core::stop_detection::DetectionParams;
use bglosa_core::telemetry::KinematicLimits;
use chrono_tz::Tz;
use serde::Deserialize;

pub const DEFAULT_TIMEZONE: &str = "Europe/Rome";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub route: Option<PathBuf>,
    pub timezone: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub min_samples: Option<usize>,
    #[serde(default)]
    pub detection: DetectionSection,
    #[serde(default)]
    pub limits: LimitsSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    pub window_m: Option<f64>,
    pub speed_eps_mps: Option<f64>,
    pub min_dwell_s: Option<f64>,
    pub max_dwell_s: Option<f64>,
    pub max_gap_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    pub v_max_mps: Option<f64>,
    pub brake_mps2: Option<f64>,
    pub a2_mps2: Option<f64>,
    pub a1_max_mps2: Option<f64>,
    pub a1_min_mps2: Option<f64>,
}

impl LimitsSection {
    /// Applies the overrides on top of `base` and checks the result.
    pub fn apply(&self, mut base: KinematicLimits) -> Result<KinematicLimits> {
        let fields = [
            (&mut base.v_max, self.v_max_mps),
            (&mut base.brake, self.brake_mps2),
            (&mut base.a2, self.a2_mps2),
            (&mut base.a1_max, self.a1_max_mps2),
            (&mut base.a1_min, self.a1_min_mps2),
        ];
        for (field, value) in fields {
            if let Some(v) = value {
                *field = v;
            }
        }
        base.validate().context("kinematic limit overrides")?;
        Ok(base)
    }
}

/// Everything a subcommand needs after flags and config are merged.
#[derive(Debug)]
pub struct RunConfig {
    pub route: Option<PathBuf>,
    pub timezone: Tz,
    pub seed: u64,
    pub out: PathBuf,
    pub min_samples: usize,
    pub detection: DetectionParams,
    pub limits: LimitsSection,
}

pub struct Overrides {
    pub config: Option<PathBuf>,
    pub route: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub timezone: Option<String>,
}

impl RunConfig {
    pub fn resolve(flags: Overrides) -> Result<Self> {
        let (file, base_dir) = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                let file: ConfigFile = toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?;
                let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (file, dir)
            }
            None => (ConfigFile::default(), PathBuf::new()),
        };
        // paths in the config file are relative to the file itself
        let route = flags.route.or_else(|| file.route.map(|p| base_dir.join(p)));
        if let Some(route) = &route {
            if !route.exists() {
                bail!("route file {} does not exist", route.display());
            }
        }
        let tz_name = flags
            .timezone
            .or(file.timezone)
            .unwrap_or_else(|| DEFAULT_TIMEZONE.to_string());
        let timezone: Tz = tz_name
            .parse()
            .map_err(|_| anyhow::anyhow!("unknown timezone {tz_name:?}"))?;

        let defaults = DetectionParams::default();
        let d = &file.detection;
        let detection = DetectionParams {
            window: d.window_m.unwrap_or(defaults.window),
            speed_eps: d.speed_eps_mps.unwrap_or(defaults.speed_eps),
            min_dwell: d.min_dwell_s.unwrap_or(defaults.min_dwell),
            max_dwell: d.max_dwell_s.unwrap_or(defaults.max_dwell),
            max_gap: d.max_gap_s.unwrap_or(defaults.max_gap),
        };
        detection.validate().context("detection parameters")?;
        let min_samples = file.min_samples.unwrap_or(20);
        if min_samples == 0 {
            bail!("min_samples must be at least 1");
        }
        Ok(Self {
            route,
            timezone,
            seed: flags.seed.or(file.seed).unwrap_or(0),
            out: flags
                .out
                .or_else(|| file.out.map(|p| base_dir.join(p)))
                .unwrap_or_else(|| PathBuf::from(".")),
            min_samples,
            detection,
            limits: file.limits,
        })
    }
}
