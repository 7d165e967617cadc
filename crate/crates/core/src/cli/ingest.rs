//! CSV time-series ingestion.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::ObservedPath;

/// Largest tolerated relative deviation of a time gap from the median gap.
pub const GAP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    Drop,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSpec {
    pub path: PathBuf,
    /// Time column; when `None`, `time` and then `t` are tried and rows are
    /// taken as equispaced if neither exists.
    pub time_col: Option<String>,
    /// Value column; when `None`, `value` and then `x` are tried.
    pub value_col: Option<String>,
    pub missing: MissingPolicy,
    /// Map the observed span onto `[0, 1]`.
    pub rescale: bool,
    /// Reject unevenly spaced time stamps instead of warning.
    pub strict_times: bool,
    /// Fit `ln x` instead of `x`.
    pub log: bool,
}

impl IngestSpec {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        IngestSpec {
            path: path.into(),
            time_col: None,
            value_col: None,
            missing: MissingPolicy::Drop,
            rescale: true,
            strict_times: false,
            log: false,
        }
    }
}

fn is_missing(field: &str) -> bool {
    matches!(field, "" | "." | "NA" | "N/A" | "na" | "NaN" | "nan" | "null")
}

fn find_column(headers: &csv::StringRecord, wanted: Option<&str>, fallbacks: &[&str]) -> Result<Option<usize>> {
    let pos = |name: &str| headers.iter().position(|h| h.trim() == name);
    match wanted {
        Some(name) => pos(name)
            .map(Some)
            .ok_or_else(|| Error::Data(format!("column {name:?} not found in header"))),
        None => Ok(fallbacks.iter().find_map(|f| pos(f))),
    }
}

fn parse_field(record: &csv::StringRecord, col: usize, name: &str, line: u64) -> Result<Option<f64>> {
    let raw = record.get(col).unwrap_or("").trim();
    if is_missing(raw) {
        return Ok(None);
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| Error::Data(format!("line {line}, column {name:?}: cannot parse {raw:?} as a number")))?;
    if v.is_nan() {
        return Ok(None);
    }
    if !v.is_finite() {
        return Err(Error::Data(format!("line {line}, column {name:?}: value is not finite")));
    }
    Ok(Some(v))
}

/// Read a CSV series into an [`ObservedPath`].
pub fn ingest(spec: &IngestSpec) -> Result<ObservedPath> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(&spec.path)
        .map_err(|e| Error::Data(format!("{}: {e}", spec.path.display())))?;
    let headers = reader.headers()?.clone();
    let value_idx = find_column(&headers, spec.value_col.as_deref(), &["value", "x"])?
        .ok_or_else(|| Error::Data("no value column (expected `value` or `x`)".into()))?;
    let time_idx = find_column(&headers, spec.time_col.as_deref(), &["time", "t"])?;
    let value_name = headers[value_idx].to_string();
    let time_name = time_idx.map(|i| headers[i].to_string());

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut dropped = 0usize;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let value = parse_field(&record, value_idx, &value_name, line)?;
        let time = match (time_idx, &time_name) {
            (Some(i), Some(name)) => Some(parse_field(&record, i, name, line)?),
            _ => None,
        };
        let missing = value.is_none() || matches!(time, Some(None));
        if missing {
            if spec.missing == MissingPolicy::Error {
                return Err(Error::Data(format!("line {line}: missing value")));
            }
            dropped += 1;
            continue;
        }
        values.push(value.unwrap_or_default());
        if let Some(Some(t)) = time {
            times.push(t);
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} rows with missing entries");
    }
    if values.len() < 3 {
        return Err(Error::Data(format!("need at least 3 usable rows, found {}", values.len())));
    }

    if spec.log {
        if let Some(v) = values.iter().find(|v| **v <= 0.0) {
            return Err(Error::Data(format!("log transform needs positive values, found {v}")));
        }
        values.iter_mut().for_each(|v| *v = v.ln());
    }

    let horizon = if time_idx.is_some() {
        let span = check_spacing(&times, spec.strict_times)?;
        if spec.rescale { 1.0 } else { span }
    } else {
        log::warn!("no time column: rows are taken as equispaced on [0, 1]");
        1.0
    };
    log::info!(
        "ingested {} rows from {} (n = {} increments, horizon {horizon})",
        values.len(),
        spec.path.display(),
        values.len() - 1
    );
    ObservedPath::new(values, horizon)
}

/// Verify strictly increasing, evenly spaced times; returns the span.
fn check_spacing(times: &[f64], strict: bool) -> Result<f64> {
    let span = times[times.len() - 1] - times[0];
    if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Data(format!(
            "times must increase strictly: rows {} and {} have t = {} and {}",
            i + 1,
            i + 2,
            times[i],
            times[i + 1]
        )));
    }
    let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(f64::total_cmp);
    let typical = gaps[gaps.len() / 2];
    let offender = times
        .windows(2)
        .position(|w| ((w[1] - w[0]) - typical).abs() > GAP_TOLERANCE * typical);
    if let Some(i) = offender {
        let msg = format!(
            "irregular time gap between rows {} and {} (t = {} to {}, typical gap {typical})",
            i + 1,
            i + 2,
            times[i],
            times[i + 1]
        );
        if strict {
            return Err(Error::Data(msg));
        }
        log::warn!("{msg}; treating rows as equispaced");
    }
    Ok(span)
}
