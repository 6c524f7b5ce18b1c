//! Transient diffusion model of the unlimited G/G/1 queue.
//!
//! Closed forms for the reflecting and absorbing barriers and the
//! first-passage density, plus the instantaneous-return process assembled in
//! the Laplace domain and inverted with Stehfest. The reflecting solution is
//! a heavy-load approximation; the return process models the idle state as a
//! boundary atom whose sojourn ends with a jump back to x = 1.

use crate::diffusion::{DiffusionCoeffs, InitialCondition, InteriorStart, SojournDensity};
use crate::error::{Error, Result};
use crate::laplace::StehfestTable;
use crate::math::{ln_normal_sf, normal_pdf, normal_sf, SQRT_2PI};

/// Upper truncation point for integrals of transient densities over
/// `[0, inf)`: beyond `x0 + |beta| t + 12 sqrt(alpha t)` the remaining mass
/// is below 1e-10.
pub fn integration_cutoff(x0: f64, t: f64, coeffs: &DiffusionCoeffs) -> f64 {
    x0 + coeffs.beta.abs() * t + 12.0 * (coeffs.alpha_d * t).sqrt()
}

/// Transient density of the diffusion reflected at x = 0, started from a
/// point at `x0`.
///
/// This is the analytic x-derivative of the normal-CDF expression for the
/// reflected process, expanded into two Gaussian terms and a tail term, so
/// it stays accurate for small t.
pub fn reflecting_pdf(x: f64, t: f64, x0: f64, coeffs: &DiffusionCoeffs) -> f64 {
    debug_assert!(t > 0.0 && x >= 0.0);
    let (beta, alpha) = (coeffs.beta, coeffs.alpha_d);
    let spread = (alpha * t).sqrt();
    let direct = normal_pdf((x - x0 - beta * t) / spread) / spread;
    let z = (x + x0 + beta * t) / spread;
    let drift_exp = 2.0 * beta * x / alpha;
    // Image term with the exponents combined to avoid inf * 0.
    let image = (drift_exp - 0.5 * z * z).exp() / (spread * SQRT_2PI);
    let tail = if beta == 0.0 {
        0.0
    } else if drift_exp < 600.0 {
        -(2.0 * beta / alpha) * drift_exp.exp() * normal_sf(z)
    } else {
        -(2.0 * beta / alpha) * (drift_exp + ln_normal_sf(z)).exp()
    };
    let value = direct + image + tail;
    debug_assert!(value > -1e-6, "reflecting density went negative: {value}");
    value.max(0.0)
}

/// Stationary solution of the reflected diffusion for negative drift: an
/// exponential density with rate `2 |beta| / alpha`.
#[derive(Debug, Clone, Copy)]
pub struct SteadyState {
    rate: f64,
}

impl SteadyState {
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            self.rate * (-self.rate * x).exp()
        }
    }

    pub fn mean(&self) -> f64 {
        1.0 / self.rate
    }
}

/// Steady state of the reflected diffusion; requires `beta < 0`.
pub fn steady_state(coeffs: &DiffusionCoeffs) -> Result<SteadyState> {
    if coeffs.beta >= 0.0 {
        return Err(Error::NoSteadyState { beta: coeffs.beta });
    }
    Ok(SteadyState {
        rate: -2.0 * coeffs.beta / coeffs.alpha_d,
    })
}

/// Mean of the steady-state density, `alpha / (2 |beta|)`.
pub fn steady_state_mean(coeffs: &DiffusionCoeffs) -> Result<f64> {
    steady_state(coeffs).map(|s| s.mean())
}

/// Transient density of the diffusion absorbed at x = 0 (sub-stochastic;
/// the missing mass has already hit the barrier).
pub fn absorbing_pdf(x: f64, t: f64, x0: f64, coeffs: &DiffusionCoeffs) -> f64 {
    debug_assert!(t > 0.0 && x >= 0.0 && x0 > 0.0);
    let (beta, alpha) = (coeffs.beta, coeffs.alpha_d);
    let spread = (alpha * t).sqrt();
    let u_direct = (x - x0 - beta * t) / spread;
    let u_image = (x + x0 - beta * t) / spread;
    // Image coefficient exp(-2 beta x0 / alpha) folded into the exponent.
    let direct = (-0.5 * u_direct * u_direct).exp();
    let image = (-2.0 * beta * x0 / alpha - 0.5 * u_image * u_image).exp();
    let value = (direct - image) / (spread * SQRT_2PI);
    debug_assert!(value > -1e-6, "absorbing density went negative: {value}");
    value.max(0.0)
}

/// Density of the first passage time from `x0` to the barrier at 0.
pub fn first_passage_density(t: f64, x0: f64, coeffs: &DiffusionCoeffs) -> f64 {
    debug_assert!(t > 0.0 && x0 > 0.0);
    let (beta, alpha) = (coeffs.beta, coeffs.alpha_d);
    let u = x0 + beta * t;
    x0 / (2.0 * std::f64::consts::PI * alpha * t.powi(3)).sqrt() * (-u * u / (2.0 * alpha * t)).exp()
}

fn big_a(s: f64, coeffs: &DiffusionCoeffs) -> f64 {
    (coeffs.beta * coeffs.beta + 2.0 * coeffs.alpha_d * s).sqrt()
}

/// Laplace transform of the first-passage density:
/// `exp(-x0 (beta + A(s)) / alpha)` with `A(s) = sqrt(beta^2 + 2 alpha s)`.
pub fn first_passage_transform(s: f64, x0: f64, coeffs: &DiffusionCoeffs) -> f64 {
    (-x0 * (coeffs.beta + big_a(s, coeffs)) / coeffs.alpha_d).exp()
}

/// Laplace transform of the absorbing-barrier density started at `x0`.
pub fn absorbing_pdf_transform(x: f64, s: f64, x0: f64, coeffs: &DiffusionCoeffs) -> f64 {
    let (beta, alpha) = (coeffs.beta, coeffs.alpha_d);
    let a = big_a(s, coeffs);
    let drift = beta * (x - x0) / alpha;
    let direct = (drift - (x - x0).abs() * a / alpha).exp();
    let image = (drift - (x + x0) * a / alpha).exp();
    (direct - image) / a
}

/// Laplace transform of the total jump intensity out of the barrier
/// (Volterra system resolved in the transform domain).
fn return_intensity_transform(
    s: f64,
    initial: &InitialCondition,
    l0: &SojournDensity,
    coeffs: &DiffusionCoeffs,
) -> Result<f64> {
    let entering = initial.p0 + passage_from_interior(s, initial, coeffs);
    let l0_s = l0.transform(s);
    let denom = 1.0 - l0_s * first_passage_transform(s, 1.0, coeffs);
    if denom.abs() < 1e-14 {
        return Err(Error::ResonantBarrier { s });
    }
    Ok(entering * l0_s / denom)
}

/// `gamma_bar_{psi,0}(s)` for the interior part of the initial condition.
fn passage_from_interior(s: f64, initial: &InitialCondition, coeffs: &DiffusionCoeffs) -> f64 {
    match &initial.interior {
        InteriorStart::None => 0.0,
        InteriorStart::Point { x0, mass } => mass * first_passage_transform(s, *x0, coeffs),
        InteriorStart::Sampled { xs, density } => {
            let mut acc = 0.0;
            for i in 1..xs.len() {
                let f = |j: usize| {
                    if xs[j] <= 0.0 {
                        0.0
                    } else {
                        density[j] * first_passage_transform(s, xs[j], coeffs)
                    }
                };
                acc += 0.5 * (f(i) + f(i - 1)) * (xs[i] - xs[i - 1]);
            }
            acc
        }
    }
}

fn interior_pdf_transform(
    x: f64,
    s: f64,
    initial: &InitialCondition,
    coeffs: &DiffusionCoeffs,
) -> f64 {
    match &initial.interior {
        InteriorStart::None => 0.0,
        InteriorStart::Point { x0, mass } => mass * absorbing_pdf_transform(x, s, *x0, coeffs),
        InteriorStart::Sampled { xs, density } => {
            let mut acc = 0.0;
            for i in 1..xs.len() {
                let f = |j: usize| {
                    if xs[j] <= 0.0 {
                        0.0
                    } else {
                        density[j] * absorbing_pdf_transform(x, s, xs[j], coeffs)
                    }
                };
                acc += 0.5 * (f(i) + f(i - 1)) * (xs[i] - xs[i - 1]);
            }
            acc
        }
    }
}

/// Laplace transform of the instantaneous-return density at position `x`.
///
/// Assembled from the absorbing-barrier transform, the first-passage
/// transform, and the barrier sojourn transform.
pub fn return_process_pdf_transform(
    x: f64,
    s: f64,
    initial: &InitialCondition,
    l0: &SojournDensity,
    coeffs: &DiffusionCoeffs,
) -> Result<f64> {
    let g1 = return_intensity_transform(s, initial, l0, coeffs)?;
    Ok(interior_pdf_transform(x, s, initial, coeffs)
        + g1 * absorbing_pdf_transform(x, s, 1.0, coeffs))
}

/// Laplace transform of the barrier probability `p0(t)`.
pub fn return_process_p0_transform(
    s: f64,
    initial: &InitialCondition,
    l0: &SojournDensity,
    coeffs: &DiffusionCoeffs,
) -> Result<f64> {
    let g1 = return_intensity_transform(s, initial, l0, coeffs)?;
    let entering = initial.p0
        + passage_from_interior(s, initial, coeffs)
        + g1 * first_passage_transform(s, 1.0, coeffs);
    Ok((entering - g1) / s)
}

/// Return-process density at `(x, t)`, inverted numerically. Tiny negative
/// inversion artifacts are clipped to zero.
pub fn return_process_pdf(
    x: f64,
    t: f64,
    initial: &InitialCondition,
    l0: &SojournDensity,
    coeffs: &DiffusionCoeffs,
    table: &StehfestTable,
) -> Result<f64> {
    let value = table.invert(
        |s| return_process_pdf_transform(x, s, initial, l0, coeffs).unwrap_or(f64::NAN),
        t,
    )?;
    Ok(value.max(0.0))
}

/// Barrier probability `p0(t)` of the return process.
pub fn return_process_p0(
    t: f64,
    initial: &InitialCondition,
    l0: &SojournDensity,
    coeffs: &DiffusionCoeffs,
    table: &StehfestTable,
) -> Result<f64> {
    let value = table.invert(
        |s| return_process_p0_transform(s, initial, l0, coeffs).unwrap_or(f64::NAN),
        t,
    )?;
    Ok(value.clamp(0.0, 1.0))
}

/// Return-process density sampled on a grid, with clipping accounted for.
///
/// Negative inversion artifacts are clipped to zero; if the clipped mass
/// exceeds 1e-3 the inversion is considered broken and an error is raised
/// instead of silently renormalizing.
pub fn return_process_density_curve(
    xs: &[f64],
    t: f64,
    initial: &InitialCondition,
    l0: &SojournDensity,
    coeffs: &DiffusionCoeffs,
    table: &StehfestTable,
) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(xs.len());
    let mut clipped = 0.0;
    let mut prev_x: Option<f64> = None;
    for &x in xs {
        let raw = table.invert(
            |s| return_process_pdf_transform(x, s, initial, l0, coeffs).unwrap_or(f64::NAN),
            t,
        )?;
        if raw < 0.0 {
            if let Some(px) = prev_x {
                clipped += -raw * (x - px);
            }
        }
        values.push(raw.max(0.0));
        prev_x = Some(x);
    }
    if clipped > 1e-3 {
        return Err(Error::ExcessiveClipping { clipped });
    }
    Ok(values)
}
