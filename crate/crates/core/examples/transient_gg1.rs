//! Transient behavior of the unlimited single-server queue under the
//! diffusion approximation: the reflecting-barrier density relaxing to its
//! steady state, and the instantaneous-return process recovering the exact
//! M/M/1 idle probability.
//!
//! Run with: cargo run --example transient_gg1

use aqm_diffusion::diffusion::gg1::{
    reflecting_pdf, return_process_p0, return_process_pdf, steady_state,
};
use aqm_diffusion::diffusion::{InitialCondition, SojournDensity, TrafficMoments};
use aqm_diffusion::laplace::stehfest_coeffs;

fn main() {
    // M/M/1 with rho = 0.75.
    let moments = TrafficMoments::new(0.75, 1.0, 1.0, 1.0).unwrap();
    let coeffs = moments.coeffs();
    let steady = steady_state(&coeffs).unwrap();

    println!("reflecting barrier, started at x0 = 1 (heavy-load approximation)");
    println!("{:>8} {:>10} {:>10} {:>10}", "t", "f(1,t)", "f(3,t)", "f(6,t)");
    for t in [0.5, 2.0, 10.0, 50.0, 200.0] {
        println!(
            "{t:>8.1} {:>10.5} {:>10.5} {:>10.5}",
            reflecting_pdf(1.0, t, 1.0, &coeffs),
            reflecting_pdf(3.0, t, 1.0, &coeffs),
            reflecting_pdf(6.0, t, 1.0, &coeffs),
        );
    }
    println!(
        "steady state:  {:>10.5} {:>10.5} {:>10.5}  (mean {:.3})\n",
        steady.pdf(1.0),
        steady.pdf(3.0),
        steady.pdf(6.0),
        steady.mean()
    );

    // Return process: absorbed at 0, idles, jumps back to x = 1. The idle
    // probability converges to the exact M/M/1 value 1 - rho.
    let table = stehfest_coeffs(14).unwrap();
    let initial = InitialCondition::empty();
    let idle_end = SojournDensity::exponential(moments.lambda);
    println!("instantaneous-return process from an empty queue");
    println!("{:>8} {:>10} {:>12}", "t", "p0(t)", "f(3,t)");
    for t in [1.0, 5.0, 20.0, 80.0, 200.0] {
        let p0 = return_process_p0(t, &initial, &idle_end, &coeffs, &table).unwrap();
        let f3 = return_process_pdf(3.0, t, &initial, &idle_end, &coeffs, &table).unwrap();
        println!("{t:>8.1} {p0:>10.5} {f3:>12.6}");
    }
    println!("exact M/M/1 idle probability: {:.3}", 0.25);
}
