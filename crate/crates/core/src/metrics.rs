//! Per-iteration metrics records, written as JSON lines.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MlshError, Result};

/// One record per (iteration, group) for training runs, or per
/// (iteration, task) for adaptation curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRecord {
    pub run: String,
    pub iteration: usize,
    pub group: usize,
    pub phase: String,
    pub task: u64,
    /// Environment steps taken by the whole run up to the end of this
    /// iteration.
    pub timesteps: u64,
    pub episodes: usize,
    pub episode_return: Option<f64>,
    pub success_rate: Option<f64>,
    /// Mean summed reward per master decision.
    pub macro_return: Option<f64>,
    pub master_loss: Option<f64>,
    pub master_entropy: Option<f64>,
    pub sub_loss: Option<f64>,
    pub sub_entropy: Option<f64>,
}

/// Episode summary of a set of completed-episode returns.
pub(crate) fn summarize(returns: &[f64]) -> (Option<f64>, Option<f64>) {
    if returns.is_empty() {
        return (None, None);
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let success = returns.iter().filter(|&&r| r > 0.0).count() as f64 / n;
    (Some(mean), Some(success))
}

pub fn write_jsonl(records: &[MetricsRecord], w: &mut impl Write) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<MetricsRecord>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| MlshError::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}
