//! Experiment orchestration: load a config, run the requested model(s)
//! over R replications, and emit plot-ready CSV plus a JSON summary.

pub mod config;
pub mod output;

use std::path::Path;

pub use config::{
    apply_sweep_param, load_config, load_config_str, preset_descriptions, ExperimentSpec,
    ModelChoice,
};
pub use output::{ModelSummary, SummaryReport};

use serde::Serialize;

use crate::ensemble;
use crate::error::Result;
use crate::feedback::{self, StepRecord};
use crate::{des, Error};

/// Long-run mean and standard error across replications: each trajectory is
/// reduced to its time-weighted post-warmup mean, then averaged.
pub fn summarize(
    trajectories: &[Vec<StepRecord>],
    horizon: f64,
    warmup_fraction: f64,
) -> (f64, f64) {
    let means: Vec<f64> = trajectories
        .iter()
        .map(|records| ensemble::long_run_mean(records, horizon, warmup_fraction))
        .collect();
    ensemble::mean_and_stderr(&means)
}

/// Runs the requested models and writes `timeseries_<model>.csv` and
/// `summary.json` into `out_dir`.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<SummaryReport> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir)?;

    let diffusion = if spec.model.runs_diffusion() {
        let ens = feedback::run_ensemble(&spec.mixed, spec.replications)?;
        output::write_timeseries(&out_dir.join("timeseries_diffusion.csv"), &ens.grid)?;
        Some(ModelSummary::from_ensemble(&ens))
    } else {
        None
    };
    let des_summary = if spec.model.runs_des() {
        let ens = des::run_ensemble(&spec.des_config(), spec.replications)?;
        output::write_timeseries(&out_dir.join("timeseries_des.csv"), &ens.grid)?;
        Some(ModelSummary::from_ensemble(&ens))
    } else {
        None
    };

    let report = SummaryReport {
        seed: spec.mixed.seed,
        preset: spec.preset.clone(),
        config: spec.clone(),
        diffusion,
        des: des_summary,
    };
    output::write_summary(&out_dir.join("summary.json"), &report)?;
    Ok(report)
}

/// One sweep point in the combined sweep summary.
#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub param: String,
    pub value: f64,
    pub report: SummaryReport,
}

/// Runs the experiment once per parameter value, each into its own
/// subdirectory, and writes a combined `sweep_summary.json`.
pub fn run_sweep(
    base: &ExperimentSpec,
    param: &str,
    values: &[f64],
    out_dir: &Path,
) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::ConfigValidation {
            field: "values".into(),
            reason: "sweep needs at least one value".into(),
        });
    }
    std::fs::create_dir_all(out_dir)?;
    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let mut spec = base.clone();
        apply_sweep_param(&mut spec, param, value)?;
        let sub = out_dir.join(format!("{param}_{value}"));
        let report = run_experiment(&spec, &sub)?;
        points.push(SweepPoint {
            param: param.to_string(),
            value,
            report,
        });
    }
    let json = serde_json::to_string_pretty(&points)
        .map_err(|e| Error::ConfigParse(format!("sweep serialization failed: {e}")))?;
    std::fs::write(out_dir.join("sweep_summary.json"), json + "\n")?;
    Ok(points)
}
