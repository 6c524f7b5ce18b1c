//! Impact of arrival variability on the controlled queue: sweeps the
//! squared coefficient of variation of the interarrival time for each
//! fractional-PI controller set.
//!
//! Run with: cargo run --example traffic_variation

use aqm_diffusion::harness::config::preset_controllers;
use aqm_diffusion::{des, feedback};

fn main() {
    println!(
        "{:<8} {:>6} {:>12} {:>10}",
        "preset", "c2_a", "diffusion", "des"
    );
    for name in ["pia-1", "pia-2", "pia-3"] {
        for c2_arrival in [1.0, 4.0, 16.0] {
            let (mixed_ctl, des_ctl) = preset_controllers(name).unwrap();
            let mut config = feedback::MixedModelConfig::new(mixed_ctl);
            config.seed = 99;
            config.c2_arrival = c2_arrival;
            let diffusion = feedback::run_ensemble(&config, 40).unwrap();
            let des_config = feedback::MixedModelConfig {
                controller: des_ctl,
                ..config.clone()
            };
            let sim = des::run_ensemble(&des_config, 300).unwrap();
            let (dm, _) = diffusion.long_run_summary();
            let (ds, _) = sim.long_run_summary();
            println!("{name:<8} {c2_arrival:>6.1} {dm:>12.3} {ds:>10.3}");
        }
    }
}
