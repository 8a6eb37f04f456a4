//! Real-data pipeline: parse timestamp CSVs, derive inter-arrival times,
//! window them, and label windows with the log-moment estimator so the
//! network can be trained against observed event streams.

use crate::dataset::{DatasetMeta, LabeledDataset};
use crate::linalg::Mat;
use crate::mom::{mom_estimate, ClipPolicy};
use crate::{Error, Result};
use chrono::{NaiveDate, NaiveDateTime};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

/// How the timestamp column is encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampFormat {
    /// Naive wall-clock strings such as `2015-12-10 17:10:52`.
    IsoDatetime,
    EpochSeconds,
    EpochMicros,
}

impl TimestampFormat {
    /// Units of the inter-arrival values this format produces.
    pub fn units(&self) -> &'static str {
        match self {
            TimestampFormat::EpochMicros => "microseconds",
            _ => "seconds",
        }
    }
}

impl std::str::FromStr for TimestampFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iso" | "iso_datetime" => Ok(Self::IsoDatetime),
            "epoch-seconds" | "epoch_seconds" => Ok(Self::EpochSeconds),
            "epoch-micros" | "epoch_micros" => Ok(Self::EpochMicros),
            other => Err(Error::Config(format!(
                "unknown timestamp format '{other}' (iso, epoch-seconds, epoch-micros)"
            ))),
        }
    }
}

/// Timestamp column selector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSel {
    Name(String),
    Index(usize),
}

impl std::str::FromStr for ColumnSel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.parse::<usize>() {
            Ok(i) => Self::Index(i),
            Err(_) => Self::Name(s.to_string()),
        })
    }
}

/// Source description for one timestamp series.
#[derive(Debug, Clone)]
pub struct TimestampSeriesSpec {
    pub path: PathBuf,
    pub column: ColumnSel,
    pub format: TimestampFormat,
    /// Sort parsed timestamps before differencing (default true).
    pub sort: bool,
    pub has_header: bool,
    pub delimiter: u8,
    /// Hard-error once more than this fraction of rows fails to parse.
    pub max_unparseable_frac: f64,
    /// Keep only events on this calendar date (as recorded, no timezone).
    pub date_filter: Option<NaiveDate>,
}

impl TimestampSeriesSpec {
    pub fn new(path: PathBuf, column: ColumnSel, format: TimestampFormat) -> Self {
        Self {
            path,
            column,
            format,
            sort: true,
            has_header: true,
            delimiter: b',',
            max_unparseable_frac: 0.01,
            date_filter: None,
        }
    }
}

/// Bookkeeping from parsing one source file.
#[derive(Debug, Clone, Serialize)]
pub struct SourceStats {
    /// Data rows seen (header excluded).
    pub n_raw: usize,
    pub n_unparseable: usize,
    pub n_date_filtered: usize,
    /// Timestamps successfully parsed and retained.
    pub n_parsed: usize,
    /// Consecutive gaps formed (`n_parsed - 1`).
    pub n_gaps: usize,
    pub n_dropped_nonpositive: usize,
    /// Positive gaps remaining.
    pub n_valid: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub units: String,
}

fn parse_timestamp(field: &str, format: TimestampFormat) -> Option<f64> {
    let field = field.trim();
    if field.is_empty() {
        return None;
    }
    match format {
        TimestampFormat::EpochSeconds | TimestampFormat::EpochMicros => {
            field.parse::<f64>().ok().filter(|v| v.is_finite())
        }
        TimestampFormat::IsoDatetime => {
            const FORMATS: [&str; 4] = [
                "%Y-%m-%d %H:%M:%S%.f",
                "%Y-%m-%dT%H:%M:%S%.f",
                "%Y/%m/%d %H:%M:%S%.f",
                "%Y-%m-%d %H:%M",
            ];
            for f in FORMATS {
                if let Ok(dt) = NaiveDateTime::parse_from_str(field, f) {
                    return Some(dt.and_utc().timestamp_micros() as f64 / 1e6);
                }
            }
            None
        }
    }
}

fn timestamp_date(value: f64, format: TimestampFormat) -> Option<NaiveDate> {
    let secs = match format {
        TimestampFormat::EpochMicros => value / 1e6,
        _ => value,
    };
    chrono::DateTime::from_timestamp(secs.floor() as i64, 0).map(|dt| dt.date_naive())
}

/// Parse the declared column into timestamps, difference them in source
/// units, and drop non-positive gaps.
pub fn load_interarrivals(spec: &TimestampSeriesSpec) -> Result<(Vec<f64>, SourceStats)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(spec.has_header)
        .delimiter(spec.delimiter)
        .flexible(true)
        .from_path(&spec.path)?;

    let col = match &spec.column {
        ColumnSel::Index(i) => *i,
        ColumnSel::Name(name) => {
            if !spec.has_header {
                return Err(Error::Config(
                    "column selected by name but the file has no header row".into(),
                ));
            }
            let headers = reader.headers()?;
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "timestamp column '{name}' not found (headers: {})",
                        headers.iter().collect::<Vec<_>>().join(", ")
                    ))
                })?
        }
    };

    let mut timestamps = Vec::new();
    let mut n_raw = 0usize;
    let mut n_unparseable = 0usize;
    let mut n_date_filtered = 0usize;
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                n_raw += 1;
                n_unparseable += 1;
                continue;
            }
        };
        n_raw += 1;
        match record.get(col).and_then(|f| parse_timestamp(f, spec.format)) {
            Some(v) => {
                if let Some(want) = spec.date_filter {
                    match timestamp_date(v, spec.format) {
                        Some(d) if d == want => timestamps.push(v),
                        _ => n_date_filtered += 1,
                    }
                } else {
                    timestamps.push(v);
                }
            }
            None => n_unparseable += 1,
        }
    }

    if n_raw == 0 {
        return Err(Error::Format(format!(
            "{}: no data rows",
            spec.path.display()
        )));
    }
    if n_unparseable as f64 > spec.max_unparseable_frac * n_raw as f64 {
        return Err(Error::Format(format!(
            "{}: {n_unparseable} of {n_raw} rows unparseable, above the {}% tolerance",
            spec.path.display(),
            spec.max_unparseable_frac * 100.0
        )));
    }
    if timestamps.len() < 2 {
        return Err(Error::Format(format!(
            "{}: need at least two parseable timestamps, got {}",
            spec.path.display(),
            timestamps.len()
        )));
    }

    if spec.sort {
        timestamps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    let t_start = timestamps[0];
    let t_end = *timestamps.last().unwrap();

    let n_parsed = timestamps.len();
    let mut gaps = Vec::with_capacity(n_parsed - 1);
    let mut n_dropped_nonpositive = 0usize;
    for w in timestamps.windows(2) {
        let g = w[1] - w[0];
        if g > 0.0 && g.is_finite() {
            gaps.push(g);
        } else {
            n_dropped_nonpositive += 1;
        }
    }

    let stats = SourceStats {
        n_raw,
        n_unparseable,
        n_date_filtered,
        n_parsed,
        n_gaps: n_parsed - 1,
        n_dropped_nonpositive,
        n_valid: gaps.len(),
        t_start,
        t_end,
        units: spec.format.units().to_string(),
    };
    Ok((gaps, stats))
}

/// Sliding windows over a gap sequence.
#[derive(Debug, Clone)]
pub struct WindowSet {
    pub windows: Mat,
    pub window_len: usize,
    pub stride: usize,
    pub source_stats: Option<SourceStats>,
}

/// Deterministic overlapping windows; stride 1 is maximal overlap.
pub fn make_windows(gaps: &[f64], window_len: usize, stride: usize) -> Result<WindowSet> {
    if window_len < 3 {
        return Err(Error::Config(
            "window_len must be >= 3 (moment estimation needs three points)".into(),
        ));
    }
    if stride < 1 {
        return Err(Error::Config("stride must be >= 1".into()));
    }
    if gaps.len() < window_len {
        return Err(Error::Config(format!(
            "sequence of {} gaps is shorter than window_len {window_len}",
            gaps.len()
        )));
    }
    if gaps.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
        return Err(Error::Config(
            "windows require strictly positive finite gaps".into(),
        ));
    }
    let n_windows = (gaps.len() - window_len) / stride + 1;
    let mut windows = Mat::zeros(n_windows, window_len);
    for i in 0..n_windows {
        let lo = i * stride;
        windows
            .row_mut(i)
            .copy_from_slice(&gaps[lo..lo + window_len]);
    }
    Ok(WindowSet {
        windows,
        window_len,
        stride,
        source_stats: None,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LabelStats {
    pub n_windows: usize,
    pub n_valid: usize,
    pub n_invalid: usize,
}

/// Label every window with its moment estimate; windows whose estimate is
/// invalid are excluded and counted.
pub fn label_windows_with_mom(
    window_set: &WindowSet,
    clip: &ClipPolicy,
) -> Result<(LabeledDataset, LabelStats)> {
    let n = window_set.windows.rows();
    let mut kept = Vec::new();
    for (i, row) in window_set.windows.iter_rows().enumerate() {
        let est = mom_estimate(row, clip);
        if est.valid && est.mu_hat.is_finite() && est.beta_hat.is_finite() {
            kept.push((i, est.mu_hat, est.beta_hat));
        }
    }
    let stats = LabelStats {
        n_windows: n,
        n_valid: kept.len(),
        n_invalid: n - kept.len(),
    };
    if kept.is_empty() {
        return Err(Error::Numerical(format!(
            "all {n} windows produced invalid moment estimates; nothing to label"
        )));
    }

    let mut windows = Mat::zeros(kept.len(), window_set.window_len);
    let mut labels = Mat::zeros(kept.len(), 2);
    for (r, (i, mu, beta)) in kept.iter().enumerate() {
        windows
            .row_mut(r)
            .copy_from_slice(window_set.windows.row(*i));
        labels.row_mut(r).copy_from_slice(&[*mu, *beta]);
    }

    let units = window_set
        .source_stats
        .as_ref()
        .map(|s| s.units.clone());
    Ok((
        LabeledDataset {
            windows,
            labels,
            seq_len: window_set.window_len,
            rng_seed: 0,
            meta: DatasetMeta {
                source: "ingested".into(),
                sampler: None,
                mu_range: None,
                beta_range: None,
                units,
            },
        },
        stats,
    ))
}

/// `ingest_stats.json` payload.
#[derive(Debug, Serialize)]
pub struct IngestStats<'a> {
    pub source: &'a SourceStats,
    pub window_len: usize,
    pub stride: usize,
    pub n_windows: usize,
    pub labels: LabelStats,
}

pub fn write_ingest_stats(path: &Path, stats: &IngestStats) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(stats)? + "\n")?;
    Ok(())
}
