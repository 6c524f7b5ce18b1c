//! Drop-probability responses of the two AQM controllers: the RED ramp and
//! the fractional-order PI response to a queue excursion.
//!
//! Run with: cargo run --example drop_controllers

use aqm_diffusion::controllers::{
    AqmConfig, PiAlphaConfig, RedConfig, RedController, RedState,
};

fn main() {
    let red_config = RedConfig {
        min_th: 10.0,
        max_th: 20.0,
        p_max: 0.1,
        ewma_weight: 1.0,
    };
    println!("RED ramp (instantaneous average):");
    for q in [5.0, 10.0, 12.5, 15.0, 19.9, 20.0, 25.0] {
        let (p, _) = aqm_diffusion::controllers::red_drop_prob(
            &red_config,
            &RedState::default(),
            q,
        );
        println!("  queue {q:>5.1} -> p = {p:.4}");
    }

    // Same ramp consumed through the classic lagged average.
    let mut red = RedController::new(RedConfig {
        ewma_weight: 0.002,
        ..red_config
    });
    for _ in 0..500 {
        red.drop_prob(25.0);
    }
    println!(
        "after 500 samples at queue 25 with weight 0.002 the average is {:.2}",
        red.avg()
    );

    // PI^alpha: a queue excursion above the setpoint charges the integral
    // term; the response outlasts the excursion.
    let mut pi = AqmConfig::PiAlpha(PiAlphaConfig {
        k_p: 0.0001,
        k_i: 0.0014,
        order: -0.8,
        setpoint: 10.0,
        window: 64,
        literal_sign: false,
    })
    .build();
    println!("\nPI^alpha (K_i = 0.0014, order -0.8) during and after an excursion to 18:");
    let trace: Vec<f64> = std::iter::repeat_n(10.0, 5)
        .chain(std::iter::repeat_n(18.0, 20))
        .chain(std::iter::repeat_n(10.0, 10))
        .collect();
    for (k, q) in trace.iter().enumerate() {
        let p = pi.drop_prob(*q);
        if k % 5 == 4 {
            println!("  step {k:>2}, queue {q:>4.1} -> p = {p:.5}");
        }
    }
}
