//! Diffusion approximation of single-server queues.
//!
//! The queue-length process is replaced by a diffusion whose drift and
//! instantaneous variance match the first two moments of the interarrival
//! and service times. [`gg1`] covers the unlimited queue (reflecting
//! barrier, absorbing barrier, first-passage densities, and the
//! instantaneous-return process in the Laplace domain); [`gg1n`] covers the
//! finite queue with two instantaneous-return barriers, solved by
//! time-stepping a Volterra convolution system.

pub mod gg1;
pub mod gg1n;

use crate::error::{Error, Result};
use crate::math::{adaptive_simpson, integrate_grid};

/// First two moments of the arrival and service processes; the sole input
/// to the diffusion coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficMoments {
    /// Arrival rate (packets/time).
    pub lambda: f64,
    /// Service rate (packets/time).
    pub mu: f64,
    /// Squared coefficient of variation of the interarrival time.
    pub c2_a: f64,
    /// Squared coefficient of variation of the service time.
    pub c2_b: f64,
}

impl TrafficMoments {
    /// `lambda` may be zero (a silenced source); everything else must keep
    /// the diffusion variance positive.
    pub fn new(lambda: f64, mu: f64, c2_a: f64, c2_b: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "lambda",
                reason: format!("must be finite and nonnegative, got {lambda}"),
            });
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "mu",
                reason: format!("must be finite and positive, got {mu}"),
            });
        }
        if c2_a < 0.0 || c2_b < 0.0 {
            return Err(Error::InvalidParameter {
                field: "c2",
                reason: "squared coefficients of variation must be nonnegative".into(),
            });
        }
        let m = Self { lambda, mu, c2_a, c2_b };
        if m.coeffs().alpha_d <= 0.0 {
            return Err(Error::InvalidParameter {
                field: "c2",
                reason: "diffusion variance C_A^2 lambda + C_B^2 mu must be positive".into(),
            });
        }
        Ok(m)
    }

    /// Diffusion coefficients: drift `lambda - mu` and variance
    /// `C_A^2 lambda + C_B^2 mu`.
    pub fn coeffs(&self) -> DiffusionCoeffs {
        DiffusionCoeffs {
            beta: self.lambda - self.mu,
            alpha_d: self.c2_a * self.lambda + self.c2_b * self.mu,
        }
    }
}

/// Drift and instantaneous variance of the diffusion.
///
/// The variance is called `alpha_d` to keep it apart from the fractional
/// controller order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionCoeffs {
    pub beta: f64,
    pub alpha_d: f64,
}

/// Computes the diffusion coefficients for a set of traffic moments.
pub fn coeffs(moments: &TrafficMoments) -> DiffusionCoeffs {
    moments.coeffs()
}

/// Sojourn-time density at a barrier, with an evaluable Laplace transform.
///
/// The default idle-period model is exponential with the arrival rate (the
/// idle period ends at the next arrival); a full buffer drains after an
/// exponential service stage. Erlang stages are available where a less
/// variable sojourn is wanted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SojournDensity {
    Exponential { rate: f64 },
    Erlang { shape: u32, rate: f64 },
}

impl SojournDensity {
    pub fn exponential(rate: f64) -> Self {
        SojournDensity::Exponential { rate }
    }

    /// Density value at `t >= 0`. A zero rate never ends the sojourn and
    /// yields the zero density.
    pub fn density(&self, t: f64) -> f64 {
        match *self {
            SojournDensity::Exponential { rate } => {
                if rate <= 0.0 {
                    0.0
                } else {
                    rate * (-rate * t).exp()
                }
            }
            SojournDensity::Erlang { shape, rate } => {
                if rate <= 0.0 || shape == 0 {
                    return 0.0;
                }
                let k = shape as f64;
                let mut log_num = k * rate.ln() + (k - 1.0) * t.max(1e-300).ln() - rate * t;
                for i in 2..shape {
                    log_num -= (i as f64).ln();
                }
                if shape >= 2 && t == 0.0 {
                    0.0
                } else {
                    log_num.exp()
                }
            }
        }
    }

    /// Laplace transform at `s > 0`.
    pub fn transform(&self, s: f64) -> f64 {
        match *self {
            SojournDensity::Exponential { rate } => {
                if rate <= 0.0 {
                    0.0
                } else {
                    rate / (rate + s)
                }
            }
            SojournDensity::Erlang { shape, rate } => {
                if rate <= 0.0 || shape == 0 {
                    0.0
                } else {
                    (rate / (rate + s)).powi(shape as i32)
                }
            }
        }
    }
}

/// Where the process starts: probability masses at the barriers plus an
/// interior part (a point or a sampled density) carrying the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    pub p0: f64,
    pub p_n: f64,
    pub interior: InteriorStart,
}

/// Interior part of an initial condition.
#[derive(Debug, Clone, PartialEq)]
pub enum InteriorStart {
    /// No interior mass.
    None,
    /// Point mass at `x0`, total `mass`.
    Point { x0: f64, mass: f64 },
    /// Density sampled on a grid; carries its own (sub-unit) mass.
    Sampled { xs: Vec<f64>, density: Vec<f64> },
}

impl InitialCondition {
    /// All mass at the empty-queue barrier.
    pub fn empty() -> Self {
        Self {
            p0: 1.0,
            p_n: 0.0,
            interior: InteriorStart::None,
        }
    }

    /// Unit point mass at `x0 > 0`.
    pub fn point(x0: f64) -> Self {
        Self {
            p0: 0.0,
            p_n: 0.0,
            interior: InteriorStart::Point { x0, mass: 1.0 },
        }
    }

    /// Boundary masses plus a point carrying the remainder.
    pub fn with_boundary_masses(p0: f64, p_n: f64, x0: f64) -> Self {
        Self {
            p0,
            p_n,
            interior: InteriorStart::Point {
                x0,
                mass: (1.0 - p0 - p_n).max(0.0),
            },
        }
    }

    /// Restart condition from an evolved density, renormalized to unit mass
    /// so discretization leakage does not accumulate across restarts.
    pub fn from_density(qd: &QueueDensity) -> Self {
        let mass = qd.total_mass();
        debug_assert!(
            (mass - 1.0).abs() < 5e-3,
            "restart density mass {mass} drifted beyond tolerance"
        );
        let scale = if mass > 0.0 { 1.0 / mass } else { 1.0 };
        Self {
            p0: qd.p0 * scale,
            p_n: qd.p_n * scale,
            interior: InteriorStart::Sampled {
                xs: qd.xs.clone(),
                density: qd.interior.iter().map(|f| f * scale).collect(),
            },
        }
    }

    /// Mass of the interior part.
    pub fn interior_mass(&self) -> f64 {
        match &self.interior {
            InteriorStart::None => 0.0,
            InteriorStart::Point { mass, .. } => *mass,
            InteriorStart::Sampled { xs, density } => integrate_grid(xs, density),
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.p0 + self.p_n + self.interior_mass()
    }

    pub fn validate(&self) -> Result<()> {
        let total = self.total_mass();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter {
                field: "initial condition",
                reason: format!("total mass {total} must be 1"),
            });
        }
        Ok(())
    }
}

/// Evolving state of the finite-queue diffusion: a sampled interior density
/// and the boundary masses.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueDensity {
    pub t: f64,
    /// Uniform grid over [0, N], endpoints included (density vanishes there).
    pub xs: Vec<f64>,
    pub interior: Vec<f64>,
    pub p0: f64,
    pub p_n: f64,
}

impl QueueDensity {
    pub fn capacity(&self) -> f64 {
        *self.xs.last().expect("empty grid")
    }

    pub fn total_mass(&self) -> f64 {
        self.p0 + self.p_n + integrate_grid(&self.xs, &self.interior)
    }

    /// Mean queue length: boundary masses plus the discretized interior,
    /// `sum_n n p(n)` with the tail bin absorbing any remainder.
    pub fn mean_queue(&self) -> f64 {
        let n_max = self.capacity().round() as usize;
        let mut bins = discretize_sampled(&self.xs, &self.interior, n_max);
        bins[0] += self.p0;
        bins[n_max] += self.p_n;
        bins.iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }
}

/// Discretizes a density function on `x >= 0` into unit bins centered on the
/// integers: `p(0)` integrates over [0, 0.5], `p(n)` over [n-0.5, n+0.5].
/// Whatever mass lies beyond the last bin edge is assigned to the tail bin,
/// so the result sums to the total mass of the input.
pub fn discretize_fn<F: Fn(f64) -> f64>(density: F, n_max: usize) -> Vec<f64> {
    let mut bins = Vec::with_capacity(n_max + 1);
    let tol = 1e-12;
    bins.push(adaptive_simpson(&density, 0.0, 0.5, tol));
    for n in 1..=n_max {
        let lo = n as f64 - 0.5;
        let hi = n as f64 + 0.5;
        bins.push(adaptive_simpson(&density, lo, hi, tol));
    }
    // Tail beyond the last edge: integrate until the contribution fades.
    let mut edge = n_max as f64 + 0.5;
    let mut tail = 0.0;
    for _ in 0..1000 {
        let chunk = adaptive_simpson(&density, edge, edge + 1.0, tol);
        tail += chunk;
        edge += 1.0;
        if chunk < 1e-14 {
            break;
        }
    }
    bins[n_max] += tail;
    bins
}

/// Same discretization for a density sampled on a uniform grid.
pub fn discretize_sampled(xs: &[f64], density: &[f64], n_max: usize) -> Vec<f64> {
    debug_assert_eq!(xs.len(), density.len());
    let mut bins = vec![0.0; n_max + 1];
    for i in 1..xs.len() {
        let (x0, x1) = (xs[i - 1], xs[i]);
        let (f0, f1) = (density[i - 1], density[i]);
        // Split the trapezoid at bin boundaries (k + 0.5).
        let mut lo = x0;
        while lo < x1 - 1e-12 {
            let bin = ((lo + 1e-12) + 0.5).floor() as usize;
            let edge = bin as f64 + 0.5;
            let hi = edge.min(x1);
            let fl = f0 + (f1 - f0) * (lo - x0) / (x1 - x0);
            let fh = f0 + (f1 - f0) * (hi - x0) / (x1 - x0);
            let idx = bin.min(n_max);
            bins[idx] += 0.5 * (fl + fh) * (hi - lo);
            lo = hi;
        }
    }
    bins
}
