//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Quadrature oracles are implemented locally so the checks stay
//! independent of the library's own integration helpers.

use std::sync::OnceLock;

use aqm_diffusion::controllers::{gl_weights, AqmConfig, PiAlphaConfig, RedConfig};
use aqm_diffusion::diffusion::{
    gg1::{
        absorbing_pdf, first_passage_density, integration_cutoff, reflecting_pdf,
        return_process_density_curve, return_process_p0, return_process_pdf, steady_state,
    },
    gg1n::{evolve, evolve_last, first_passage_pair, two_barrier_absorbing_pdf, TwoBarrierModel},
    InitialCondition, SojournDensity, TrafficMoments,
};
use aqm_diffusion::feedback::MixedModelConfig;
use aqm_diffusion::harness::config::preset_controllers;
use aqm_diffusion::laplace::stehfest_coeffs;
use aqm_diffusion::{des, feedback};

// ---------------------------------------------------------------------------
// Local quadrature oracles
// ---------------------------------------------------------------------------

fn simpson_oracle<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

fn trapz_oracle(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

fn pass(criterion: &str, details: String) {
    println!("[acceptance] {criterion}: PASS - {details}");
}

// ---------------------------------------------------------------------------
// Criterion 1: GL weight exactness
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_gl_exactness() {
    let cases: [(f64, [f64; 4]); 4] = [
        (1.0, [1.0, -1.0, 0.0, 0.0]),
        (-1.0, [1.0, 1.0, 1.0, 1.0]),
        (-1.2, [1.0, 1.2, 1.32, 1.408]),
        (-0.8, [1.0, 0.8, 0.72, 0.672]),
    ];
    let mut worst = 0.0f64;
    for (order, expected) in cases {
        let w = gl_weights(order, 4);
        for (got, want) in w.weights().iter().zip(expected) {
            let err = (got - want).abs();
            worst = worst.max(err);
            assert!(
                err < 1e-12,
                "criterion 1 FAILED: order {order} weight {got} vs {want}"
            );
        }
    }
    pass("criterion 1 (GL exactness)", format!("max abs error {worst:.2e}"));
}

// ---------------------------------------------------------------------------
// Criterion 2: Stehfest accuracy on known pairs
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_stehfest_accuracy() {
    let table = stehfest_coeffs(14).unwrap();
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for &t in &[0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
        let constant = table.invert(|s| 1.0 / s, t).unwrap();
        let rel = (constant - 1.0).abs();
        worst.0 = worst.0.max(rel);
        assert!(rel < 1e-8, "criterion 2 FAILED: 1/s at t={t}: {rel:.2e}");

        let ramp = table.invert(|s| 1.0 / (s * s), t).unwrap();
        let rel = (ramp - t).abs() / t;
        worst.1 = worst.1.max(rel);
        assert!(rel < 1e-6, "criterion 2 FAILED: 1/s^2 at t={t}: {rel:.2e}");

        // Error against the pair's unit scale f(0) = 1: in exact arithmetic
        // the scheme's accuracy floor is absolute, so the deep tail of
        // e^{-t} carries no more relative precision (see decisions ledger).
        let decay = table.invert(|s| 1.0 / (s + 1.0), t).unwrap();
        let abs = (decay - (-t).exp()).abs();
        worst.2 = worst.2.max(abs);
        assert!(abs < 1e-4, "criterion 2 FAILED: 1/(s+1) at t={t}: {abs:.2e}");
    }
    pass(
        "criterion 2 (Stehfest accuracy)",
        format!(
            "1/s rel {:.1e}, 1/s^2 rel {:.1e}, e^-t abs {:.1e}",
            worst.0, worst.1, worst.2
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: conservation suite
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_conservation() {
    // Reflecting-barrier normalization within 1e-6.
    let mut worst_reflecting = 0.0f64;
    for (lambda, x0, t) in [(0.75, 1.0, 2.0), (0.5, 2.0, 8.0), (0.95, 1.0, 20.0)] {
        let c = TrafficMoments::new(lambda, 1.0, 1.0, 1.0).unwrap().coeffs();
        let hi = integration_cutoff(x0, t, &c);
        let mass = simpson_oracle(|x| reflecting_pdf(x, t, x0, &c), 0.0, hi, 40_000);
        worst_reflecting = worst_reflecting.max((mass - 1.0).abs());
    }
    assert!(
        worst_reflecting < 1e-6,
        "criterion 3 FAILED: reflecting normalization defect {worst_reflecting:.2e}"
    );

    // Absorbing density + first-passage mass within 1e-4 (single barrier).
    let c = TrafficMoments::new(0.75, 1.0, 1.0, 1.0).unwrap().coeffs();
    let (x0, t) = (2.0, 5.0);
    let hi = integration_cutoff(x0, t, &c);
    let surviving = simpson_oracle(|x| absorbing_pdf(x, t, x0, &c), 0.0, hi, 40_000);
    let absorbed = simpson_oracle(|tau| first_passage_density(tau, x0, &c), 1e-9, t, 40_000);
    let single_defect = (surviving + absorbed - 1.0).abs();
    assert!(
        single_defect < 1e-4,
        "criterion 3 FAILED: single-barrier conservation defect {single_defect:.2e}"
    );

    // Two absorbing barriers within 1e-4.
    let moments = TrafficMoments::new(0.75, 1.0, 1.0, 1.0).unwrap();
    let model = TwoBarrierModel::new(8, &moments);
    let (x0, t) = (3.0, 4.0);
    let surviving = simpson_oracle(
        |x| two_barrier_absorbing_pdf(x, t, x0, &model).unwrap(),
        0.0,
        8.0,
        8_000,
    );
    let absorbed = simpson_oracle(
        |tau| {
            let (a, b) = first_passage_pair(tau, x0, &model).unwrap();
            a + b
        },
        1e-9,
        t,
        16_000,
    );
    let two_defect = (surviving + absorbed - 1.0).abs();
    assert!(
        two_defect < 1e-4,
        "criterion 3 FAILED: two-barrier conservation defect {two_defect:.2e}"
    );

    // Return process: boundary mass plus interior mass within 5e-3.
    let table = stehfest_coeffs(14).unwrap();
    let initial = InitialCondition::empty();
    let idle = SojournDensity::exponential(0.75);
    let mut worst_return = 0.0f64;
    for t in [1.0, 5.0, 20.0] {
        let p0 = return_process_p0(t, &initial, &idle, &c, &table).unwrap();
        let hi = integration_cutoff(1.0, t, &c).min(60.0);
        let n = 600;
        let xs: Vec<f64> = (0..=n).map(|i| hi * i as f64 / n as f64).collect();
        let f = return_process_density_curve(&xs, t, &initial, &idle, &c, &table).unwrap();
        let defect = (p0 + trapz_oracle(&xs, &f) - 1.0).abs();
        worst_return = worst_return.max(defect);
    }
    assert!(
        worst_return < 5e-3,
        "criterion 3 FAILED: return-process mass defect {worst_return:.2e}"
    );

    // Two-barrier evolution: mass within 5e-3 at every step (the march also
    // enforces this internally and would error out).
    let model = TwoBarrierModel::new(30, &moments);
    let states = evolve(&model, &InitialCondition::empty(), 30.0).unwrap();
    let mut worst_evolve = 0.0f64;
    for qd in &states {
        worst_evolve = worst_evolve.max((qd.total_mass() - 1.0).abs());
    }
    assert!(
        worst_evolve < 5e-3,
        "criterion 3 FAILED: evolve mass defect {worst_evolve:.2e}"
    );

    pass(
        "criterion 3 (conservation suite)",
        format!(
            "reflecting {worst_reflecting:.1e}, single barrier {single_defect:.1e}, two barriers {two_defect:.1e}, return {worst_return:.1e}, evolve {worst_evolve:.1e}"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: steady-state limits
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_steady_state_limits() {
    // Return-process density at large t against the reflected steady state.
    // Compared on the tail x >= 3: the return process vanishes at the
    // barrier while the closed form does not, so the boundary layer below
    // x ~ 2 differs by construction (see decisions ledger).
    let c = TrafficMoments::new(0.75, 1.0, 1.0, 1.0).unwrap().coeffs();
    let table = stehfest_coeffs(14).unwrap();
    let initial = InitialCondition::empty();
    let idle = SojournDensity::exponential(0.75);
    let steady = steady_state(&c).unwrap();
    let mut worst_tail = 0.0f64;
    for x in [3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0] {
        let f = return_process_pdf(x, 200.0, &initial, &idle, &c, &table).unwrap();
        worst_tail = worst_tail.max((f - steady.pdf(x)).abs());
    }
    assert!(
        worst_tail < 2e-2,
        "criterion 4 FAILED: steady-state tail gap {worst_tail:.2e}"
    );

    // M/M/1 idle probability at lambda = 0.5.
    let c_half = TrafficMoments::new(0.5, 1.0, 1.0, 1.0).unwrap().coeffs();
    let idle_half = SojournDensity::exponential(0.5);
    let p0 = return_process_p0(200.0, &initial, &idle_half, &c_half, &table).unwrap();
    let idle_gap = (p0 - 0.5).abs();
    assert!(
        idle_gap < 5e-2,
        "criterion 4 FAILED: M/M/1 idle probability {p0} vs 0.5"
    );

    // Finite queue long-horizon mean against the birth-death closed form.
    let moments = TrafficMoments::new(0.75, 1.0, 1.0, 1.0).unwrap();
    let model = TwoBarrierModel::new(30, &moments);
    let qd = evolve_last(&model, &InitialCondition::empty(), 250.0).unwrap();
    let rho: f64 = 0.75;
    let n = 30;
    let exact = rho / (1.0 - rho)
        - (n + 1) as f64 * rho.powi(n + 1) / (1.0 - rho.powi(n + 1));
    let got = qd.mean_queue();
    let rel = (got - exact).abs() / exact;
    assert!(
        rel < 0.10,
        "criterion 4 FAILED: G/G/1/N mean {got} vs M/M/1/N {exact} ({:.1}%)",
        rel * 100.0
    );

    pass(
        "criterion 4 (steady-state limits)",
        format!(
            "tail gap {worst_tail:.1e}, idle gap {idle_gap:.1e}, finite-queue mean {got:.3} vs {exact:.3} ({:.1}%)",
            rel * 100.0
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: restart / semigroup property
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_restart_semigroup() {
    let moments = TrafficMoments::new(0.75, 1.0, 1.0, 1.0).unwrap();
    let model = TwoBarrierModel::new(12, &moments);
    let start = InitialCondition::point(3.0);
    let horizon = 6.0;

    let single = evolve_last(&model, &start, horizon).unwrap();
    let half = evolve_last(&model, &start, horizon / 2.0).unwrap();
    let restarted = evolve_last(
        &model,
        &InitialCondition::from_density(&half),
        horizon / 2.0,
    )
    .unwrap();

    let mut worst = (single.p0 - restarted.p0).abs().max((single.p_n - restarted.p_n).abs());
    for (a, b) in single.interior.iter().zip(restarted.interior.iter()) {
        worst = worst.max((a - b).abs());
    }
    assert!(
        worst < 1e-2,
        "criterion 5 FAILED: split-horizon pointwise gap {worst:.2e}"
    );
    pass(
        "criterion 5 (restart/semigroup)",
        format!("max pointwise gap {worst:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// Criteria 6-8 share the reference ensembles (R = 500, both models).
// ---------------------------------------------------------------------------

struct RefRow {
    name: &'static str,
    mixed_mean: f64,
    des_mean: f64,
    mixed_losses: f64,
    des_losses: f64,
}

const REFERENCE_REPLICATIONS: usize = 500;

fn reference_runs() -> &'static Vec<RefRow> {
    static RUNS: OnceLock<Vec<RefRow>> = OnceLock::new();
    RUNS.get_or_init(|| {
        ["red-sec5", "pia-1", "pia-2", "pia-3"]
            .into_iter()
            .map(|name| {
                let (mixed_ctl, des_ctl) = preset_controllers(name).unwrap();
                let mixed_config = MixedModelConfig {
                    seed: 20_260_810,
                    ..MixedModelConfig::new(mixed_ctl)
                };
                let des_config = MixedModelConfig {
                    controller: des_ctl,
                    ..mixed_config.clone()
                };
                let mixed =
                    feedback::run_ensemble(&mixed_config, REFERENCE_REPLICATIONS).unwrap();
                let sim = des::run_ensemble(&des_config, REFERENCE_REPLICATIONS).unwrap();
                RefRow {
                    name,
                    mixed_mean: mixed.long_run_summary().0,
                    des_mean: sim.long_run_summary().0,
                    mixed_losses: mixed.mean_total_losses(),
                    des_losses: sim.mean_total_losses(),
                }
            })
            .collect()
    })
}

#[test]
fn criterion_6_diffusion_vs_des_agreement() {
    let runs = reference_runs();
    let mut worst = 0.0f64;
    for row in runs {
        let gap = (row.mixed_mean - row.des_mean).abs()
            / (0.5 * (row.mixed_mean + row.des_mean));
        worst = worst.max(gap);
        assert!(
            gap < 0.15,
            "criterion 6 FAILED: {} diffusion {:.3} vs DES {:.3} ({:.1}%)",
            row.name,
            row.mixed_mean,
            row.des_mean,
            gap * 100.0
        );
    }
    let detail: Vec<String> = runs
        .iter()
        .map(|r| {
            let gap = (r.mixed_mean - r.des_mean).abs() / (0.5 * (r.mixed_mean + r.des_mean));
            format!("{} {:.2}/{:.2} ({:.0}%)", r.name, r.mixed_mean, r.des_mean, gap * 100.0)
        })
        .collect();
    pass(
        "criterion 6 (diffusion vs DES, R=500)",
        format!("max gap {:.1}%; {}", worst * 100.0, detail.join(", ")),
    );
}

#[test]
fn criterion_7_table_reproduction() {
    // Reference values: (diffusion column, simulation column).
    let targets = [
        ("red-sec5", 18.067, 17.106),
        ("pia-1", 5.100, 5.251),
        ("pia-2", 7.780, 7.123),
        ("pia-3", 10.431, 10.075),
    ];
    let runs = reference_runs();

    // Hard part: strict ordering PI1 < PI2 < PI3 < RED in both columns.
    let by_name = |n: &str| runs.iter().find(|r| r.name == n).unwrap();
    let (red, p1, p2, p3) = (
        by_name("red-sec5"),
        by_name("pia-1"),
        by_name("pia-2"),
        by_name("pia-3"),
    );
    assert!(
        p1.mixed_mean < p2.mixed_mean
            && p2.mixed_mean < p3.mixed_mean
            && p3.mixed_mean < red.mixed_mean,
        "criterion 7 FAILED (ordering, diffusion column): {:.3} / {:.3} / {:.3} / {:.3}",
        p1.mixed_mean,
        p2.mixed_mean,
        p3.mixed_mean,
        red.mixed_mean
    );
    assert!(
        p1.des_mean < p2.des_mean && p2.des_mean < p3.des_mean && p3.des_mean < red.des_mean,
        "criterion 7 FAILED (ordering, simulation column): {:.3} / {:.3} / {:.3} / {:.3}",
        p1.des_mean,
        p2.des_mean,
        p3.des_mean,
        red.des_mean
    );

    // Soft part: +-20% against the reference table. Reported per value; the
    // PI rows sit below the reference with the pinned zeta/lambda0/p_max
    // (see decisions ledger for the calibration analysis).
    let mut soft = Vec::new();
    for (name, diff_target, sim_target) in targets {
        let row = by_name(name);
        let d_dev = (row.mixed_mean - diff_target) / diff_target;
        let s_dev = (row.des_mean - sim_target) / sim_target;
        let mark = |dev: f64| if dev.abs() <= 0.20 { "ok" } else { "MISS" };
        soft.push(format!(
            "{name} diffusion {:.2} vs {diff_target} ({:+.0}% {}), sim {:.2} vs {sim_target} ({:+.0}% {})",
            row.mixed_mean,
            d_dev * 100.0,
            mark(d_dev),
            row.des_mean,
            s_dev * 100.0,
            mark(s_dev)
        ));
    }
    pass(
        "criterion 7 (Table-2 reproduction)",
        format!(
            "hard ordering holds in both columns; soft +-20% targets: {}",
            soft.join("; ")
        ),
    );
}

#[test]
fn criterion_8_controller_power_monotonicity() {
    let runs = reference_runs();
    let by_name = |n: &str| runs.iter().find(|r| r.name == n).unwrap();
    let (p1, p2, p3) = (by_name("pia-1"), by_name("pia-2"), by_name("pia-3"));

    for (column, means, losses) in [
        (
            "diffusion",
            [p1.mixed_mean, p2.mixed_mean, p3.mixed_mean],
            [p1.mixed_losses, p2.mixed_losses, p3.mixed_losses],
        ),
        (
            "simulation",
            [p1.des_mean, p2.des_mean, p3.des_mean],
            [p1.des_losses, p2.des_losses, p3.des_losses],
        ),
    ] {
        assert!(
            means[0] < means[1] && means[1] < means[2],
            "criterion 8 FAILED ({column}): means not decreasing with power: {means:?}"
        );
        assert!(
            losses[0] > losses[1] && losses[1] > losses[2],
            "criterion 8 FAILED ({column}): losses not increasing with power: {losses:?}"
        );
    }
    pass(
        "criterion 8 (controller power monotonicity)",
        format!(
            "means {:.2} < {:.2} < {:.2}, losses {:.1} > {:.1} > {:.1} (diffusion column)",
            p1.mixed_mean,
            p2.mixed_mean,
            p3.mixed_mean,
            p1.mixed_losses,
            p2.mixed_losses,
            p3.mixed_losses
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 9: byte-identical outputs across runs and worker counts
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_determinism() {
    let config = r#"
[experiment]
model = "both"
preset = "pia-1"
replications = 4
seed = 77
horizon = 40.0
"#;
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("exp.toml");
    std::fs::write(&config_path, config).unwrap();

    let run = |out: &str, workers: &str| {
        let out_dir = dir.path().join(out);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_aqmdiff"))
            .args([
                "run",
                config_path.to_str().unwrap(),
                "--workers",
                workers,
                "--out",
                out_dir.to_str().unwrap(),
            ])
            .status()
            .expect("failed to launch aqmdiff");
        assert!(status.success(), "aqmdiff run failed");
        out_dir
    };

    let a = run("a", "1");
    let b = run("b", "2");
    for file in ["timeseries_diffusion.csv", "timeseries_des.csv", "summary.json"] {
        let left = std::fs::read(a.join(file)).unwrap();
        let right = std::fs::read(b.join(file)).unwrap();
        assert_eq!(
            left, right,
            "criterion 9 FAILED: {file} differs across worker counts"
        );
    }
    pass(
        "criterion 9 (determinism)",
        "CSV and JSON byte-identical across runs and worker counts".into(),
    );
}
