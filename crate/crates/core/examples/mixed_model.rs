//! One replication of the mixed model: the diffusion tracks the queue
//! density while the AQM decisions and the additive-increase/halving source
//! react to it. Prints the sawtooth of the source intensity and the queue.
//!
//! Run with: cargo run --example mixed_model

use aqm_diffusion::controllers::{AqmConfig, RedConfig};
use aqm_diffusion::feedback::{run_replication, MixedModelConfig};

fn main() {
    let config = MixedModelConfig {
        seed: 7,
        horizon: 400.0,
        ..MixedModelConfig::new(AqmConfig::Red(RedConfig {
            min_th: 10.0,
            max_th: 20.0,
            p_max: 0.1,
            ewma_weight: 0.002,
        }))
    };

    let records = run_replication(&config).unwrap();
    println!("{:>8} {:>9} {:>8} {:>9} {:>6} {:>8}", "t", "mean_q", "lambda", "p_drop", "loss", "p0");
    for r in records.iter().step_by(12) {
        println!(
            "{:>8.2} {:>9.3} {:>8.3} {:>9.5} {:>6} {:>8.4}",
            r.t,
            r.mean_queue,
            r.lambda,
            r.drop_prob,
            if r.loss { "x" } else { "" },
            r.p0
        );
    }
    let losses = records.iter().filter(|r| r.loss).count();
    println!("\n{} steps, {losses} losses", records.len());
}
