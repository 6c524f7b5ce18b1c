//! The finite queue between two instantaneous-return barriers: mean queue
//! evolution from empty and the long-horizon match against the closed-form
//! M/M/1/N stationary mean.
//!
//! Run with: cargo run --example finite_queue

use aqm_diffusion::diffusion::gg1n::{evolve, evolve_last, TwoBarrierModel};
use aqm_diffusion::diffusion::{InitialCondition, TrafficMoments};

fn mm1n_mean(rho: f64, n: i32) -> f64 {
    let denom = 1.0 - rho.powi(n + 1);
    rho / (1.0 - rho) - (n + 1) as f64 * rho.powi(n + 1) / denom
}

fn main() {
    let moments = TrafficMoments::new(0.75, 1.0, 1.0, 1.0).unwrap();
    let model = TwoBarrierModel::new(30, &moments);

    println!("G/G/1/30 from empty, lambda = 0.75, mu = 1 (M/M/1/30 traffic):");
    let states = evolve(&model, &InitialCondition::empty(), 30.0).unwrap();
    println!("{:>7} {:>9} {:>9} {:>9} {:>9}", "t", "mean", "p0", "pN", "mass");
    for qd in states.iter().step_by(60) {
        println!(
            "{:>7.2} {:>9.4} {:>9.4} {:>9.6} {:>9.5}",
            qd.t,
            qd.mean_queue(),
            qd.p0,
            qd.p_n,
            qd.total_mass()
        );
    }

    let long = evolve_last(&model, &InitialCondition::empty(), 250.0).unwrap();
    println!(
        "\nlong horizon t = 250: mean {:.4} vs closed-form M/M/1/30 mean {:.4}",
        long.mean_queue(),
        mm1n_mean(0.75, 30)
    );
    println!(
        "idle probability {:.4} vs exact 1 - rho = {:.4}",
        long.p0, 0.25
    );
}
