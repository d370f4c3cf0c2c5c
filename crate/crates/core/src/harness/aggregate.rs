//! Cross-seed statistics of metrics files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::eval::mean_std;
use super::run::{read_metrics, MetricsRow};
use crate::error::{Error, Result};

/// Same columns as a per-seed file. `return_mean` is the mean over seeds of
/// their mean return and `return_std` its population standard deviation
/// across seeds; every other column is a cross-seed mean.
pub type AggregateRow = MetricsRow;

/// Accepts either a metrics file or a directory holding `metrics.csv`.
fn metrics_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("metrics.csv")
    } else {
        p.to_path_buf()
    }
}

/// Expands a run output directory (with `seed_*` children) into its metrics files.
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() && !p.join("metrics.csv").exists() {
            let mut seeds: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|c| c.join("metrics.csv").is_file())
                .collect();
            seeds.sort();
            if seeds.is_empty() {
                return Err(Error::Invalid(format!("{} holds no metrics.csv", p.display())));
            }
            out.extend(seeds.into_iter().map(|s| s.join("metrics.csv")));
        } else {
            out.push(metrics_path(p));
        }
    }
    Ok(out)
}

pub fn aggregate(inputs: &[PathBuf]) -> Result<Vec<AggregateRow>> {
    let files = expand_inputs(inputs)?;
    let runs = files.iter().map(|f| read_metrics(f)).collect::<Result<Vec<_>>>()?;
    aggregate_rows(&files, &runs)
}

/// Aggregates runs that must share their step column.
pub fn aggregate_rows(names: &[PathBuf], runs: &[Vec<MetricsRow>]) -> Result<Vec<AggregateRow>> {
    let Some(first) = runs.first() else {
        return Err(Error::Invalid("nothing to aggregate".into()));
    };
    let steps: Vec<u64> = first.iter().map(|r| r.step).collect();
    let misaligned: Vec<String> = runs
        .iter()
        .zip(names)
        .filter(|(run, _)| run.iter().map(|r| r.step).ne(steps.iter().copied()))
        .map(|(_, n)| n.display().to_string())
        .collect();
    if !misaligned.is_empty() {
        return Err(Error::Misaligned { files: misaligned });
    }
    let col = |i: usize, f: fn(&MetricsRow) -> f64| -> Vec<f64> { runs.iter().map(|r| f(&r[i])).collect() };
    let mean = |v: Vec<f64>| mean_std(&v).0;
    Ok((0..steps.len())
        .map(|i| {
            let (return_mean, return_std) = mean_std(&col(i, |r| r.return_mean));
            let episodes = col(i, |r| r.episode as f64);
            MetricsRow {
                step: steps[i],
                episode: mean(episodes).round() as u64,
                return_mean,
                return_std,
                intrinsic_mean: mean(col(i, |r| r.intrinsic_mean)),
                usage_s: mean(col(i, |r| r.usage_s)),
                entropy_mean: mean(col(i, |r| r.entropy_mean)),
                loss_critic: mean(col(i, |r| r.loss_critic)),
                loss_actor: mean(col(i, |r| r.loss_actor)),
            }
        })
        .collect())
}

pub fn write_rows<W: std::io::Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

/// Long form of a row, used when reading arbitrary CSVs for plotting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: f64,
    pub mean: f64,
    pub std: f64,
}

impl From<&MetricsRow> for CurvePoint {
    fn from(r: &MetricsRow) -> Self {
        Self {
            step: r.step as f64,
            mean: r.return_mean,
            std: r.return_std,
        }
    }
}
