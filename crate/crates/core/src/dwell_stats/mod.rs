//! Day-type / time-of-day clustering of dwell events and per-cell GEV
//! statistics.

mod fixture;

pub use fixture::{fixture_table, FIXTURE_STOP_COUNT};

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDateTime, TimeZone, Timelike, Weekday};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gev::{gev_fit_mle, gev_moments, FitOptions, GevParams};
use crate::stop_detection::DwellEvent;
use crate::telemetry::RouteModel;

/// Dwell used when neither the cell nor its cluster has statistics.
pub const DEFAULT_DWELL_S: f64 = 13.0;

pub const STATS_HEADER: [&str; 9] = [
    "stop_id", "cluster", "n", "shape", "loc", "scale", "mean_s", "std_s", "reliable",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[allow(non_camel_case_types)]
pub enum ClusterId {
    WEEK_7_10,
    WEEK_10_16,
    WEEK_16_19,
    WEEK_19_7,
    WEEKEND_7_13,
    WEEKEND_13_19,
    WEEKEND_19_7,
}

impl ClusterId {
    pub const ALL: [ClusterId; 7] = [
        ClusterId::WEEK_7_10,
        ClusterId::WEEK_10_16,
        ClusterId::WEEK_16_19,
        ClusterId::WEEK_19_7,
        ClusterId::WEEKEND_7_13,
        ClusterId::WEEKEND_13_19,
        ClusterId::WEEKEND_19_7,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClusterId::WEEK_7_10 => "WEEK_7_10",
            ClusterId::WEEK_10_16 => "WEEK_10_16",
            ClusterId::WEEK_16_19 => "WEEK_16_19",
            ClusterId::WEEK_19_7 => "WEEK_19_7",
            ClusterId::WEEKEND_7_13 => "WEEKEND_7_13",
            ClusterId::WEEKEND_13_19 => "WEEKEND_13_19",
            ClusterId::WEEKEND_19_7 => "WEEKEND_19_7",
        }
    }

    pub fn is_weekend(self) -> bool {
        matches!(
            self,
            ClusterId::WEEKEND_7_13 | ClusterId::WEEKEND_13_19 | ClusterId::WEEKEND_19_7
        )
    }

    /// Hour bands `[start, end)` on the calendar day; night clusters have two.
    pub fn hour_bands(self) -> &'static [(u32, u32)] {
        match self {
            ClusterId::WEEK_7_10 => &[(7, 10)],
            ClusterId::WEEK_10_16 => &[(10, 16)],
            ClusterId::WEEK_16_19 => &[(16, 19)],
            ClusterId::WEEKEND_7_13 => &[(7, 13)],
            ClusterId::WEEKEND_13_19 => &[(13, 19)],
            ClusterId::WEEK_19_7 | ClusterId::WEEKEND_19_7 => &[(0, 7), (19, 24)],
        }
    }
}

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClusterId {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClusterId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| StatsError::UnknownCluster(s.to_string()))
    }
}

/// Maps a local civil datetime to its cluster. Hours before 07:00 belong to
/// the night cluster of the same calendar day.
pub fn assign_cluster(local: &NaiveDateTime) -> ClusterId {
    let hour = local.hour();
    let weekend = matches!(local.weekday(), Weekday::Sat | Weekday::Sun);
    match (weekend, hour) {
        (false, 7..=9) => ClusterId::WEEK_7_10,
        (false, 10..=15) => ClusterId::WEEK_10_16,
        (false, 16..=18) => ClusterId::WEEK_16_19,
        (false, _) => ClusterId::WEEK_19_7,
        (true, 7..=12) => ClusterId::WEEKEND_7_13,
        (true, 13..=18) => ClusterId::WEEKEND_13_19,
        (true, _) => ClusterId::WEEKEND_19_7,
    }
}

/// Local civil time of an epoch-millisecond timestamp.
pub fn local_datetime(t_ms: i64, tz: Tz) -> Option<NaiveDateTime> {
    DateTime::from_timestamp_millis(t_ms).map(|utc| tz.from_utc_datetime(&utc.naive_utc()).naive_local())
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("dwell event references unknown stop {0}")]
    UnknownStop(u32),
    #[error("unknown cluster {0:?}")]
    UnknownCluster(String),
    #[error("timestamp {0} ms is out of range")]
    BadTimestamp(i64),
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellStat {
    pub stop_id: u32,
    pub cluster: ClusterId,
    pub n: usize,
    pub params: Option<GevParams>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub reliable: bool,
}

impl DwellStat {
    fn empty(stop_id: u32, cluster: ClusterId, n: usize) -> Self {
        Self {
            stop_id,
            cluster,
            n,
            params: None,
            mean: None,
            std: None,
            reliable: false,
        }
    }
}

/// Per-cluster summary over reliable cells, rounded to whole seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrandMean {
    pub cluster: ClusterId,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatsTable {
    pub cells: Vec<DwellStat>,
}

impl StatsTable {
    pub fn cell(&self, stop_id: u32, cluster: ClusterId) -> Option<&DwellStat> {
        self.cells
            .iter()
            .find(|c| c.stop_id == stop_id && c.cluster == cluster)
    }

    pub fn has_stop(&self, stop_id: u32) -> bool {
        self.cells.iter().any(|c| c.stop_id == stop_id)
    }

    pub fn grand_mean(&self, cluster: ClusterId) -> Option<GrandMean> {
        let reliable: Vec<&DwellStat> = self
            .cells
            .iter()
            .filter(|c| c.cluster == cluster && c.reliable)
            .collect();
        if reliable.is_empty() {
            return None;
        }
        let k = reliable.len() as f64;
        let mean = reliable.iter().filter_map(|c| c.mean).sum::<f64>() / k;
        let std = reliable.iter().filter_map(|c| c.std).sum::<f64>() / k;
        Some(GrandMean {
            cluster,
            mean: mean.round(),
            std: std.round(),
        })
    }

    pub fn grand_means(&self) -> Vec<GrandMean> {
        ClusterId::ALL
            .iter()
            .filter_map(|&c| self.grand_mean(c))
            .collect()
    }

    /// Dwell estimate for a stop at a local datetime: the cell mean, else the
    /// cluster grand mean, else [`DEFAULT_DWELL_S`].
    pub fn lookup_dwell(&self, stop_id: u32, local: &NaiveDateTime) -> Result<f64, StatsError> {
        if !self.has_stop(stop_id) {
            return Err(StatsError::UnknownStop(stop_id));
        }
        let cluster = assign_cluster(local);
        let cell_mean = self
            .cell(stop_id, cluster)
            .filter(|c| c.reliable)
            .and_then(|c| c.mean);
        Ok(cell_mean
            .or_else(|| self.grand_mean(cluster).map(|g| g.mean))
            .unwrap_or(DEFAULT_DWELL_S))
    }
}

pub fn lookup_dwell(
    table: &StatsTable,
    stop_id: u32,
    local: &NaiveDateTime,
) -> Result<f64, StatsError> {
    table.lookup_dwell(stop_id, local)
}

/// Fits every stop × cluster cell of `route`. Cells below
/// `opts.min_samples`, or whose fit or moments fail, are left unreliable.
pub fn build_stats_table(
    events: &[DwellEvent],
    route: &RouteModel,
    tz: Tz,
    opts: &FitOptions,
) -> Result<StatsTable, StatsError> {
    let mut buckets: BTreeMap<(u32, ClusterId), Vec<f64>> = BTreeMap::new();
    for e in events {
        if route.stop(e.stop_id).is_none() {
            return Err(StatsError::UnknownStop(e.stop_id));
        }
        let local = local_datetime(e.t_start_ms, tz).ok_or(StatsError::BadTimestamp(e.t_start_ms))?;
        buckets
            .entry((e.stop_id, assign_cluster(&local)))
            .or_default()
            .push(e.duration_s);
    }

    let mut cells = Vec::with_capacity(route.stops.len() * ClusterId::ALL.len());
    for stop in &route.stops {
        for cluster in ClusterId::ALL {
            let samples = buckets
                .get(&(stop.id, cluster))
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            cells.push(fit_cell(stop.id, cluster, samples, opts));
        }
    }
    Ok(StatsTable { cells })
}

fn fit_cell(stop_id: u32, cluster: ClusterId, samples: &[f64], opts: &FitOptions) -> DwellStat {
    let n = samples.len();
    if n < opts.min_samples {
        return DwellStat::empty(stop_id, cluster, n);
    }
    let Ok(fit) = gev_fit_mle(samples, opts) else {
        return DwellStat::empty(stop_id, cluster, n);
    };
    let Ok((mean, std)) = gev_moments(&fit.params) else {
        return DwellStat::empty(stop_id, cluster, n);
    };
    DwellStat {
        stop_id,
        cluster,
        n,
        params: Some(fit.params),
        mean: Some(mean),
        std: Some(std),
        reliable: fit.report.converged,
    }
}

pub fn write_stats_table<W: Write>(writer: W, table: &StatsTable) -> Result<(), StatsError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(STATS_HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for c in &table.cells {
        wtr.write_record([
            c.stop_id.to_string(),
            c.cluster.to_string(),
            c.n.to_string(),
            opt(c.params.map(|p| p.shape)),
            opt(c.params.map(|p| p.loc)),
            opt(c.params.map(|p| p.scale)),
            opt(c.mean),
            opt(c.std),
            c.reliable.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_stats_table<R: Read>(reader: R) -> Result<StatsTable, StatsError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != STATS_HEADER {
        return Err(StatsError::MalformedRow {
            line: 1,
            reason: format!("unexpected header {}", header.join(",")),
        });
    }
    let mut cells = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |reason: String| StatsError::MalformedRow { line, reason };
        if record.len() != STATS_HEADER.len() {
            return Err(bad("field count".into()));
        }
        let opt = |i: usize| -> Result<Option<f64>, StatsError> {
            let text = record[i].trim();
            if text.is_empty() {
                return Ok(None);
            }
            text.parse::<f64>()
                .map(Some)
                .map_err(|_| bad(format!("bad {} {text:?}", STATS_HEADER[i])))
        };
        let params = match (opt(3)?, opt(4)?, opt(5)?) {
            (Some(shape), Some(loc), Some(scale)) => Some(
                GevParams::new(shape, loc, scale).map_err(|e| bad(e.to_string()))?,
            ),
            (None, None, None) => None,
            _ => return Err(bad("shape, loc and scale must be given together".into())),
        };
        let cell = DwellStat {
            stop_id: record[0]
                .trim()
                .parse()
                .map_err(|_| bad("bad stop_id".into()))?,
            cluster: record[1].trim().parse()?,
            n: record[2].trim().parse().map_err(|_| bad("bad n".into()))?,
            params,
            mean: opt(6)?,
            std: opt(7)?,
            reliable: record[8]
                .trim()
                .parse()
                .map_err(|_| bad("reliable must be true or false".into()))?,
        };
        if cell.reliable && (cell.params.is_none() || cell.mean.is_none() || cell.std.is_none()) {
            return Err(bad("reliable cell without parameters and moments".into()));
        }
        cells.push(cell);
    }
    Ok(StatsTable { cells })
}
