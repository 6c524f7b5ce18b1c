//! Cross-validation of the two models on the reference configurations:
//! replication-averaged long-run mean queue, diffusion vs simulation.
//!
//! Uses a reduced replication count to stay quick; the acceptance suite
//! runs the full comparison.
//!
//! Run with: cargo run --example des_vs_diffusion

use aqm_diffusion::harness::{config::preset_controllers, ExperimentSpec, ModelChoice};
use aqm_diffusion::{des, feedback};

fn main() {
    println!(
        "{:<10} {:>10} {:>10} {:>7}",
        "preset", "diffusion", "des", "gap"
    );
    for name in ["red-sec5", "pia-1", "pia-2", "pia-3"] {
        let (mixed_ctl, des_ctl) = preset_controllers(name).unwrap();
        let spec = ExperimentSpec {
            model: ModelChoice::Both,
            replications: 60,
            preset: Some(name.into()),
            mixed: feedback::MixedModelConfig {
                seed: 42,
                ..feedback::MixedModelConfig::new(mixed_ctl)
            },
            des_controller: des_ctl,
        };
        let diffusion = feedback::run_ensemble(&spec.mixed, spec.replications).unwrap();
        let sim = des::run_ensemble(&spec.des_config(), 400).unwrap();
        let (dm, _) = diffusion.long_run_summary();
        let (ds, _) = sim.long_run_summary();
        let gap = (dm - ds).abs() / (0.5 * (dm + ds));
        println!("{name:<10} {dm:>10.3} {ds:>10.3} {:>6.1}%", gap * 100.0);
    }
}
