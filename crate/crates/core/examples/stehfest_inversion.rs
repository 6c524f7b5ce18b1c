//! Numerical Laplace inversion on transform pairs with known originals.
//!
//! Run with: cargo run --example stehfest_inversion

use aqm_diffusion::laplace::stehfest_coeffs;

fn main() {
    let table = stehfest_coeffs(14).unwrap();
    println!("Stehfest n=14 coefficients: {:?}\n", table.coeffs());

    println!("{:>6} {:>12} {:>12} {:>12}", "t", "1/s -> 1", "1/s^2 -> t", "1/(s+1) -> e^-t");
    for t in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
        let one = table.invert(|s| 1.0 / s, t).unwrap();
        let ramp = table.invert(|s| 1.0 / (s * s), t).unwrap();
        let decay = table.invert(|s| 1.0 / (s + 1.0), t).unwrap();
        println!(
            "{t:>6.1} {:>12.3e} {:>12.3e} {:>12.3e}",
            (one - 1.0).abs(),
            (ramp - t).abs(),
            (decay - (-t).exp()).abs()
        );
    }
    println!("(columns are absolute errors)");
}
