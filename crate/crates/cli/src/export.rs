//! Learning-curve export: metrics files to a timestep-aligned CSV.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use mlsh_core::metrics::{read_jsonl, MetricsRecord};
use mlsh_core::trainer::mean_stderr;
use serde::Serialize;

use crate::error::{CliError, Result};

/// One row of the exported CSV.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct CurvePoint {
    pub label: String,
    pub timesteps: u64,
    pub mean_return: f64,
    pub stderr: f64,
    pub seeds: usize,
}

/// A run's series: per timestep, the mean episode return over its records.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: BTreeMap<u64, f64>,
}

pub fn series_of(records: &[MetricsRecord], source: &Path) -> Result<Series> {
    let Some(first) = records.first() else {
        return Err(CliError::Config(format!("{}: no metrics records", source.display())));
    };
    let mut sums: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for r in records {
        if r.run != first.run {
            return Err(CliError::Config(format!(
                "{}: mixes runs `{}` and `{}`",
                source.display(),
                first.run,
                r.run
            )));
        }
        if let Some(ret) = r.episode_return {
            let e = sums.entry(r.timesteps).or_default();
            e.0 += ret;
            e.1 += 1;
        }
    }
    let points = sums.into_iter().map(|(t, (s, n))| (t, s / n as f64)).collect();
    Ok(Series { label: first.run.clone(), points })
}

/// Resolve a directory to its `metrics.jsonl`.
pub fn metrics_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("metrics.jsonl")
    } else {
        p.to_path_buf()
    }
}

/// Merge series with the same label: mean and standard error across series
/// at each timestep any of them reports. Labels keep first-seen order.
pub fn merge(series: &[Series]) -> Vec<CurvePoint> {
    let mut labels: Vec<&str> = Vec::new();
    for s in series {
        if !labels.contains(&s.label.as_str()) {
            labels.push(&s.label);
        }
    }
    let mut out = Vec::new();
    for label in labels {
        let group: Vec<&Series> = series.iter().filter(|s| s.label == label).collect();
        let mut steps: Vec<u64> = group.iter().flat_map(|s| s.points.keys().copied()).collect();
        steps.sort_unstable();
        steps.dedup();
        for t in steps {
            let xs: Vec<f64> = group.iter().filter_map(|s| s.points.get(&t).copied()).collect();
            let (mean, stderr) = mean_stderr(&xs);
            out.push(CurvePoint {
                label: label.to_string(),
                timesteps: t,
                mean_return: mean.unwrap_or(f64::NAN),
                stderr: stderr.unwrap_or(0.0),
                seeds: xs.len(),
            });
        }
    }
    out
}

pub fn export(inputs: &[PathBuf], w: impl Write) -> Result<Vec<CurvePoint>> {
    if inputs.is_empty() {
        return Err(CliError::Config("export needs at least one metrics file".into()));
    }
    let mut series = Vec::with_capacity(inputs.len());
    for input in inputs {
        let path = metrics_path(input);
        let records = read_jsonl(&path).map_err(|e| match e {
            mlsh_core::MlshError::Io(source) => CliError::Io { path: path.display().to_string(), source },
            other => other.into(),
        })?;
        series.push(series_of(&records, &path)?);
    }
    let points = merge(&series);
    write_csv(&points, w)?;
    Ok(points)
}

pub fn write_csv<T: Serialize>(rows: &[T], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|source| CliError::Io { path: "csv output".into(), source })?;
    Ok(())
}
