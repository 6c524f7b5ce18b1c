//! CSV and JSON output with fixed formats and non-finite guards.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::ensemble::{Ensemble, GridRecord};
use crate::error::{Error, Result};

/// Six significant digits, deterministic.
fn sig6(value: f64) -> String {
    if value == 0.0 {
        "0.00000e0".into()
    } else {
        format!("{value:.5e}")
    }
}

fn guard(value: f64, column: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteOutput { column })
    }
}

/// Writes the ensemble grid as CSV with the fixed column order
/// `t,mean_queue,lambda,drop_prob,loss,p0,pN`.
pub fn write_timeseries(path: &Path, grid: &[GridRecord]) -> Result<()> {
    let mut out = Vec::with_capacity(grid.len() * 64 + 64);
    writeln!(out, "t,mean_queue,lambda,drop_prob,loss,p0,pN")?;
    for r in grid {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            sig6(guard(r.t, "t")?),
            sig6(guard(r.mean_queue, "mean_queue")?),
            sig6(guard(r.lambda, "lambda")?),
            sig6(guard(r.drop_prob, "drop_prob")?),
            sig6(guard(r.loss_rate, "loss")?),
            sig6(guard(r.p0, "p0")?),
            sig6(guard(r.p_n, "pN")?),
        )?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Distribution summary of the final source intensity across replications.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl LambdaSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let mean = if values.is_empty() {
            0.0
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        Self {
            mean,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Per-model results in the summary report.
#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub long_run_mean_queue: f64,
    pub stderr: f64,
    pub mean_total_losses: f64,
    pub final_lambda: LambdaSummary,
    pub replications: usize,
}

impl ModelSummary {
    pub fn from_ensemble(ensemble: &Ensemble) -> Self {
        let (mean, stderr) = ensemble.long_run_summary();
        Self {
            long_run_mean_queue: mean,
            stderr,
            mean_total_losses: ensemble.mean_total_losses(),
            final_lambda: LambdaSummary::from_values(&ensemble.final_lambdas),
            replications: ensemble.replications(),
        }
    }
}

/// Everything needed to reproduce and interpret a run: config echo, seed,
/// and the per-model statistics.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryReport {
    pub seed: u64,
    pub preset: Option<String>,
    pub config: crate::harness::config::ExperimentSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<ModelSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub des: Option<ModelSummary>,
}

pub fn write_summary(path: &Path, report: &SummaryReport) -> Result<()> {
    for model in [&report.diffusion, &report.des].into_iter().flatten() {
        guard(model.long_run_mean_queue, "long_run_mean_queue")?;
        guard(model.stderr, "stderr")?;
    }
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::ConfigParse(format!("summary serialization failed: {e}")))?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_is_deterministic_and_compact() {
        assert_eq!(sig6(0.0), "0.00000e0");
        assert_eq!(sig6(1.0), "1.00000e0");
        assert_eq!(sig6(17.106), "1.71060e1");
        assert_eq!(sig6(-0.00303), "-3.03000e-3");
    }

    #[test]
    fn non_finite_values_are_refused() {
        let grid = vec![GridRecord {
            t: 0.0,
            mean_queue: f64::NAN,
            lambda: 1.0,
            drop_prob: 0.0,
            loss_rate: 0.0,
            p0: 1.0,
            p_n: 0.0,
        }];
        let dir = tempfile::tempdir().unwrap();
        let err = write_timeseries(&dir.path().join("x.csv"), &grid).unwrap_err();
        assert!(matches!(
            err,
            Error::NonFiniteOutput { column: "mean_queue" }
        ));
    }

    #[test]
    fn csv_row_count_matches_grid() {
        let grid: Vec<GridRecord> = (0..5)
            .map(|i| GridRecord {
                t: i as f64,
                mean_queue: 1.5,
                lambda: 0.5,
                drop_prob: 0.1,
                loss_rate: 0.0,
                p0: 0.2,
                p_n: 0.0,
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ts.csv");
        write_timeseries(&path, &grid).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 6); // header + 5 rows
        assert!(text.starts_with("t,mean_queue,lambda,drop_prob,loss,p0,pN\n"));
    }
}
