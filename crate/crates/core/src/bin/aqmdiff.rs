//! Command-line front end: run experiments from a config file, list the
//! built-in presets, or sweep one parameter over a list of values.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aqm_diffusion::harness::{self, ModelChoice};
use aqm_diffusion::Error;

#[derive(Parser)]
#[command(name = "aqmdiff", version, about = "Queue/AQM experiments: transient diffusion model with a discrete-event cross-check")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        /// Path to the TOML config.
        config: PathBuf,
        /// Override the model selection: diffusion | des | both.
        #[arg(long)]
        model: Option<String>,
        /// Override the replication count.
        #[arg(long)]
        reps: Option<usize>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for replications (default: all processors).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Inspect the built-in parameter presets.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Run the experiment once per value of one swept parameter.
    Sweep {
        /// Path to the TOML config.
        config: PathBuf,
        /// Parameter to vary (c2_arrival, c2_service, zeta, lambda0,
        /// lambda_max, feedback_delay, horizon).
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// Print every preset with its parameters.
    List,
}

fn install_pool(workers: Option<usize>) -> Result<(), Error> {
    if let Some(w) = workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global()
            .map_err(|e| Error::ConfigValidation {
                field: "workers".into(),
                reason: e.to_string(),
            })?;
    }
    Ok(())
}

fn run() -> Result<(), Error> {
    match Cli::parse().command {
        Command::Run {
            config,
            model,
            reps,
            seed,
            workers,
            out,
        } => {
            install_pool(workers)?;
            let mut spec = harness::load_config(&config)?;
            if let Some(m) = model {
                spec.model = ModelChoice::parse(&m)?;
            }
            if let Some(r) = reps {
                spec.replications = r;
            }
            if let Some(s) = seed {
                spec.mixed.seed = s;
            }
            let report = harness::run_experiment(&spec, &out)?;
            if let Some(d) = &report.diffusion {
                println!(
                    "diffusion: mean queue {:.4} +- {:.4} (losses {:.2}/rep)",
                    d.long_run_mean_queue, d.stderr, d.mean_total_losses
                );
            }
            if let Some(d) = &report.des {
                println!(
                    "des:       mean queue {:.4} +- {:.4} (losses {:.2}/rep)",
                    d.long_run_mean_queue, d.stderr, d.mean_total_losses
                );
            }
            println!("outputs written to {}", out.display());
            Ok(())
        }
        Command::Preset { action } => match action {
            PresetAction::List => {
                for (name, description) in harness::preset_descriptions() {
                    println!("{name:10} {description}");
                }
                Ok(())
            }
        },
        Command::Sweep {
            config,
            param,
            values,
            model,
            reps,
            seed,
            workers,
            out,
        } => {
            install_pool(workers)?;
            let mut spec = harness::load_config(&config)?;
            if let Some(m) = model {
                spec.model = ModelChoice::parse(&m)?;
            }
            if let Some(r) = reps {
                spec.replications = r;
            }
            if let Some(s) = seed {
                spec.mixed.seed = s;
            }
            let points = harness::run_sweep(&spec, &param, &values, &out)?;
            for p in &points {
                let diffusion = p
                    .report
                    .diffusion
                    .as_ref()
                    .map(|m| format!("{:.4}", m.long_run_mean_queue))
                    .unwrap_or_else(|| "-".into());
                let des = p
                    .report
                    .des
                    .as_ref()
                    .map(|m| format!("{:.4}", m.long_run_mean_queue))
                    .unwrap_or_else(|| "-".into());
                println!("{} = {:<8} diffusion {diffusion:>8}  des {des:>8}", p.param, p.value);
            }
            println!("outputs written to {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
