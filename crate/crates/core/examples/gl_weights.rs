//! Grunwald-Letnikov differintegral weights for a few orders, and one
//! weighted-history evaluation.
//!
//! Run with: cargo run --example gl_weights

use aqm_diffusion::controllers::{gl_apply, gl_weights};

fn main() {
    println!("first 8 differintegral weights by fractional order:");
    for order in [1.0, -1.0, -1.2, -0.8, -0.4, 0.5] {
        let w = gl_weights(order, 8);
        let rendered: Vec<String> = w.weights().iter().map(|v| format!("{v:7.4}")).collect();
        println!("  order {order:>5}: [{}]", rendered.join(", "));
    }

    // Weighted sum over a short history, newest sample last: with order -1.2
    // the weights grow with lag, so old samples keep gaining influence.
    let samples = [2.0, 1.0, 3.0];
    let w = gl_weights(-1.2, 8);
    println!(
        "\napplying order -1.2 to history {samples:?} (newest last): {}",
        gl_apply(&w, &samples).unwrap()
    );

    // Partial sums for negative orders are nondecreasing: a sustained error
    // accumulates without bound, which is what gives the integral action.
    let w = gl_weights(-1.2, 64);
    let total: f64 = w.weights().iter().sum();
    println!("sum of the first 64 weights at order -1.2: {total:.3}");
}
