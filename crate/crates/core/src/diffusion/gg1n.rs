//! Transient diffusion model of the finite G/G/1/N queue.
//!
//! Two instantaneous-return barriers at x = 0 and x = N: the process is
//! absorbed at a barrier, sojourns there (idle or full period), then jumps
//! back to x = 1 or x = N - 1. The absorbing-barrier building block is the
//! classical image series; the coupled return intensities solve a Volterra
//! convolution system marched forward in time with trapezoidal quadrature,
//! which avoids Stehfest on the oscillatory two-barrier transforms.

use crate::diffusion::{
    DiffusionCoeffs, InitialCondition, InteriorStart, QueueDensity, SojournDensity, TrafficMoments,
};
use crate::error::{Error, Result};
use crate::math::normal_sf;

/// Exponent threshold for dropping image terms: exp(-150) is far below the
/// 1e-12 term bound at all practical scales.
const TERM_EXPONENT_BOUND: f64 = 150.0;

/// Finite-queue model: capacity, coefficients, barrier sojourn densities and
/// discretization controls.
#[derive(Debug, Clone)]
pub struct TwoBarrierModel {
    pub capacity: usize,
    pub coeffs: DiffusionCoeffs,
    /// Sojourn at the empty barrier; defaults to exponential(lambda).
    pub l0: SojournDensity,
    /// Sojourn at the full barrier; defaults to exponential(mu).
    pub l_n: SojournDensity,
    /// Maximum image index |n| of the absorbing-barrier series.
    pub series_cutoff: usize,
    /// Time step of the Volterra march (already capped by the stability
    /// default `min(0.05, 1/(4(lambda+mu)))`).
    pub time_step: f64,
    /// Interior grid points per unit of x.
    pub x_resolution: usize,
}

impl TwoBarrierModel {
    /// Model with the default discretization for the given traffic.
    pub fn new(capacity: usize, moments: &TrafficMoments) -> Self {
        let coeffs = moments.coeffs();
        Self {
            capacity,
            coeffs,
            l0: SojournDensity::exponential(moments.lambda),
            l_n: SojournDensity::exponential(moments.mu),
            series_cutoff: 40,
            time_step: default_time_step(moments, 0.05),
            x_resolution: 10,
        }
    }

    pub fn with_time_step(mut self, h: f64) -> Self {
        self.time_step = h;
        self
    }

    pub fn with_resolution(mut self, points_per_unit: usize) -> Self {
        self.x_resolution = points_per_unit.max(1);
        self
    }

    pub fn with_sojourns(mut self, l0: SojournDensity, l_n: SojournDensity) -> Self {
        self.l0 = l0;
        self.l_n = l_n;
        self
    }

    fn n(&self) -> f64 {
        self.capacity as f64
    }

    /// Uniform grid over [0, N] including both endpoints.
    pub fn grid(&self) -> Vec<f64> {
        let cells = self.capacity * self.x_resolution;
        let dx = self.n() / cells as f64;
        (0..=cells).map(|i| i as f64 * dx).collect()
    }
}

/// Default Volterra step: `min(cap, 1 / (4 (lambda + mu)))`.
pub fn default_time_step(moments: &TrafficMoments, cap: f64) -> f64 {
    cap.min(1.0 / (4.0 * (moments.lambda + moments.mu)))
}

/// Integer image-index window covering every term whose exponent can exceed
/// `-TERM_EXPONENT_BOUND`, for one image family.
///
/// The term exponent is `beta x'/alpha - (d - x')^2 / (2 alpha t)` with
/// `x' = stride * n + offset`; solving the quadratic for the bound gives the
/// admissible range of x'.
fn image_window(
    d: f64,
    stride: f64,
    offset: f64,
    t: f64,
    coeffs: &DiffusionCoeffs,
) -> (i64, i64) {
    let (beta, alpha) = (coeffs.beta, coeffs.alpha_d);
    let center = d + beta * t;
    let disc = (center * center - d * d + 2.0 * alpha * t * TERM_EXPONENT_BOUND).max(0.0);
    let half_width = disc.sqrt();
    let lo = (center - half_width - offset) / stride;
    let hi = (center + half_width - offset) / stride;
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    (lo.floor() as i64, hi.ceil() as i64)
}

/// Shared evaluation of the two-family image series.
///
/// For each image `n`, `weight` receives the image offsets
/// `(x'_n, x''_n)` and the Gaussian exponent arguments are
/// `x - x0 - image - beta t`. `select` maps the direct and mirrored
/// contributions of one index to the accumulated value.
fn image_series<F>(
    x: f64,
    t: f64,
    x0: f64,
    model: &TwoBarrierModel,
    mut term: F,
) -> Result<f64>
where
    F: FnMut(f64, f64, f64) -> f64,
{
    let coeffs = &model.coeffs;
    let (beta, alpha) = (coeffs.beta, coeffs.alpha_d);
    let two_n = 2.0 * model.n();
    let d = x - x0 - beta * t;

    // Direct family x' = 2nN; mirrored family x'' = -2x0 - 2nN.
    let (lo1, hi1) = image_window(d, two_n, 0.0, t, coeffs);
    let (lo2, hi2) = image_window(d, -two_n, -2.0 * x0, t, coeffs);

    let max_index = lo1
        .abs()
        .max(hi1.abs())
        .max(lo2.abs())
        .max(hi2.abs()) as usize;
    if max_index > model.series_cutoff {
        return Err(Error::SeriesTruncation {
            cutoff: model.series_cutoff,
            t,
        });
    }

    let norm = 1.0 / (2.0 * std::f64::consts::PI * alpha * t).sqrt();
    let mut acc = 0.0;
    for n in lo1..=hi1 {
        let image = two_n * n as f64;
        let dev = d - image;
        let exponent = beta * image / alpha - dev * dev / (2.0 * alpha * t);
        if exponent > -TERM_EXPONENT_BOUND {
            acc += term(exponent.exp() * norm, image, 1.0);
        }
    }
    for n in lo2..=hi2 {
        let image = -2.0 * x0 - two_n * n as f64;
        let dev = d - image;
        let exponent = beta * image / alpha - dev * dev / (2.0 * alpha * t);
        if exponent > -TERM_EXPONENT_BOUND {
            acc += term(exponent.exp() * norm, image, -1.0);
        }
    }
    Ok(acc)
}

/// Unnormalized Gaussian factor on a grid cell: the plain sample when the
/// kernel is wide enough for the grid to carry it, the cell-averaged mass
/// otherwise (a pointwise sample of a sub-cell spike would not integrate
/// correctly).
#[inline]
fn gaussian_cell(dev: f64, width: f64, dx: f64) -> f64 {
    if width >= 2.0 * dx {
        let z = dev / width;
        (-0.5 * z * z).exp()
    } else {
        let lo = (dev - 0.5 * dx) / width;
        let hi = (dev + 0.5 * dx) / width;
        (normal_sf(lo) - normal_sf(hi)) * width * crate::math::SQRT_2PI / dx
    }
}

/// Adds `scale * phi(x_i, sigma; x0)` to `out` for every grid point, using
/// per-image Gaussian tables localized to their support. Equivalent to
/// calling [`two_barrier_absorbing_pdf`] pointwise but far cheaper on a
/// whole row.
fn add_pdf_row(
    xs: &[f64],
    sigma: f64,
    x0: f64,
    scale: f64,
    model: &TwoBarrierModel,
    out: &mut [f64],
) -> Result<()> {
    let coeffs = &model.coeffs;
    let (beta, alpha) = (coeffs.beta, coeffs.alpha_d);
    let two_n = 2.0 * model.n();
    let dx = xs[1] - xs[0];
    let norm = scale / (2.0 * std::f64::consts::PI * alpha * sigma).sqrt();
    let last = xs.len() - 1;

    let d_lo = -x0 - beta * sigma; // image offset putting the center at x = 0
    let d_hi = model.n() - x0 - beta * sigma;
    // Image count bound: drift-favored images gain exponent linearly in n
    // while the Gaussian distance grows quadratically, so a short fixed
    // point on the reach converges.
    let mut n_span = 1.0_f64;
    for _ in 0..4 {
        let pref_bound = beta.abs() * (two_n * n_span + 2.0 * x0) / alpha;
        let reach = (2.0 * alpha * sigma * (TERM_EXPONENT_BOUND + pref_bound)).sqrt();
        n_span = ((d_lo.abs().max(d_hi.abs()) + reach) / two_n).ceil().max(1.0);
    }
    let n_lo = -(n_span as i64);
    let n_hi = n_span as i64;
    if n_span as usize > model.series_cutoff {
        return Err(Error::SeriesTruncation {
            cutoff: model.series_cutoff,
            t: sigma,
        });
    }

    let width = (alpha * sigma).sqrt();
    for n in n_lo..=n_hi {
        for (image, sign) in [
            (two_n * n as f64, 1.0),
            (-2.0 * x0 - two_n * n as f64, -1.0),
        ] {
            let pref = beta * image / alpha;
            let reach_sq = 2.0 * alpha * sigma * (TERM_EXPONENT_BOUND + pref);
            if reach_sq <= 0.0 {
                continue;
            }
            let half_width = reach_sq.sqrt().max(dx);
            let center = x0 + image + beta * sigma;
            let lo = (((center - half_width) / dx).ceil().max(1.0)) as usize;
            let hi = (((center + half_width) / dx).floor() as i64).min(last as i64 - 1);
            if hi < lo as i64 {
                continue;
            }
            if width >= 2.0 * dx {
                // Wide kernel: plain samples, exponents combined.
                for i in lo..=(hi as usize) {
                    let dev = xs[i] - center;
                    let exponent = pref - dev * dev / (2.0 * alpha * sigma);
                    if exponent > -TERM_EXPONENT_BOUND {
                        out[i] += sign * norm * exponent.exp();
                    }
                }
            } else {
                // Sub-cell kernel: distribute cell-averaged mass. `pref` is
                // modest here (near images only), so the split exp is safe.
                let term_scale = sign * norm * pref.exp();
                for i in lo..=(hi as usize) {
                    let dev = xs[i] - center;
                    out[i] += term_scale * gaussian_cell(dev, width, dx);
                }
            }
        }
    }
    Ok(())
}

/// Density of the diffusion between two absorbing barriers at 0 and N,
/// started from `x0`, via the image series. Vanishes at both barriers.
pub fn two_barrier_absorbing_pdf(
    x: f64,
    t: f64,
    x0: f64,
    model: &TwoBarrierModel,
) -> Result<f64> {
    debug_assert!(t > 0.0);
    debug_assert!((0.0..=model.n()).contains(&x));
    if x <= 0.0 || x >= model.n() {
        // Absorbing boundary condition; the series cancels there in exact
        // arithmetic but leaves rounding residue.
        return Ok(0.0);
    }
    let value = image_series(x, t, x0, model, |gauss, _image, sign| sign * gauss)?;
    debug_assert!(value > -1e-6, "two-barrier density went negative: {value}");
    Ok(value.max(0.0))
}

/// First-passage densities from `x0` to each barrier: `(to 0, to N)`.
///
/// Term-wise analytic differentiation of the image series, evaluated as the
/// probability flux into each barrier (sign-flipped at x = N).
pub fn first_passage_pair(t: f64, x0: f64, model: &TwoBarrierModel) -> Result<(f64, f64)> {
    debug_assert!(t > 0.0);
    let beta = model.coeffs.beta;
    let n = model.n();
    // Flux into 0 = (alpha/2) df/dx at 0; each term contributes
    // gauss * (x0 + image + beta t) / (2t) with the family sign.
    let at_zero = image_series(0.0, t, x0, model, |gauss, image, sign| {
        sign * gauss * (x0 + image + beta * t) / (2.0 * t)
    })?;
    let at_n = image_series(n, t, x0, model, |gauss, image, sign| {
        sign * gauss * (n - x0 - image - beta * t) / (2.0 * t)
    })?;
    Ok((at_zero.max(0.0), at_n.max(0.0)))
}

/// One forward-marched two-barrier evolution: return intensities, boundary
/// masses and the running mass balance on the step grid.
struct VolterraMarch<'m> {
    model: &'m TwoBarrierModel,
    h: f64,
    steps: usize,
    /// Initial boundary atoms.
    atom0: f64,
    atom_n: f64,
    initial: InitialCondition,
    /// Initial interior resampled onto the model grid, when present.
    psi: Option<PsiWeights>,
    /// Jump intensities out of each barrier and the boundary masses.
    g1: Vec<f64>,
    g_n1: Vec<f64>,
    p0: Vec<f64>,
    p_n: Vec<f64>,
}

/// First-passage kernel from a fixed start, tabulated as exact per-cell
/// integrals `I[r] = int_{(r-1)h}^{rh} gamma(sigma) dsigma`.
///
/// The kernels are bumps only a few steps wide, so pointwise trapezoid
/// convolution leaks mass at every renewal generation; integrating the
/// kernel cells exactly (product integration) removes that bias while the
/// smooth intensity factor keeps its trapezoid weights.
struct PassageKernel {
    /// Cell integrals, index 1..=steps (index 0 unused).
    cells_to0: Vec<f64>,
    cells_to_n: Vec<f64>,
    /// Probability of still being in the interior after r steps.
    survival: Vec<f64>,
}

fn passage_kernel(x0: f64, h: f64, steps: usize, model: &TwoBarrierModel) -> Result<PassageKernel> {
    // 4-panel Simpson per cell; gamma(0) = 0.
    const SUB: usize = 4;
    let mut cells_to0 = vec![0.0; steps + 1];
    let mut cells_to_n = vec![0.0; steps + 1];
    let dh = h / SUB as f64;
    let mut prev = (0.0, 0.0);
    for r in 1..=steps {
        let base = (r - 1) as f64 * h;
        let mut acc0 = 0.0;
        let mut acc_n = 0.0;
        for p in 0..SUB {
            let mid = first_passage_pair(base + (p as f64 + 0.5) * dh, x0, model)?;
            let right = first_passage_pair(base + (p as f64 + 1.0) * dh, x0, model)?;
            acc0 += dh / 6.0 * (prev.0 + 4.0 * mid.0 + right.0);
            acc_n += dh / 6.0 * (prev.1 + 4.0 * mid.1 + right.1);
            prev = right;
        }
        cells_to0[r] = acc0;
        cells_to_n[r] = acc_n;
    }
    let mut survival = Vec::with_capacity(steps + 1);
    let mut alive = 1.0;
    survival.push(1.0);
    for r in 1..=steps {
        alive -= cells_to0[r] + cells_to_n[r];
        survival.push(alive.max(0.0));
    }
    Ok(PassageKernel {
        cells_to0,
        cells_to_n,
        survival,
    })
}

/// Interior density resampled onto the model grid with trapezoid quadrature
/// weights folded in.
struct PsiWeights {
    /// density * quadrature weight at each grid point
    weighted: Vec<f64>,
    /// one-sided slopes at the two barriers (for zero-lag flux limits)
    slope0: f64,
    slope_n: f64,
}

fn psi_weights(grid: &[f64], xs: &[f64], density: &[f64]) -> PsiWeights {
    let dx = grid[1] - grid[0];
    let same_grid = xs.len() == grid.len()
        && (xs[0] - grid[0]).abs() < 1e-12
        && (xs[xs.len() - 1] - grid[grid.len() - 1]).abs() < 1e-12;
    let values: Vec<f64> = if same_grid {
        density.to_vec()
    } else {
        grid.iter().map(|&x| sample_linear(xs, density, x)).collect()
    };
    let last = values.len() - 1;
    let weighted = values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let w = if k == 0 || k == last { 0.5 * dx } else { dx };
            v * w
        })
        .collect();
    PsiWeights {
        weighted,
        slope0: (values[1] - values[0]) / dx,
        slope_n: (values[last - 1] - values[last]) / dx,
    }
}

/// Adds `int psi(xi) phi(x, t; xi) dxi` to `out` over the whole grid row.
///
/// Both image families reduce to correlations of the weighted density with
/// shifted Gaussian tables: the direct family depends on x - xi, the
/// mirrored one on x + xi with an extra exp(-2 beta xi / alpha) weight.
fn add_psi_pdf_row(
    grid: &[f64],
    t: f64,
    psi: &PsiWeights,
    model: &TwoBarrierModel,
    out: &mut [f64],
) -> Result<()> {
    let (beta, alpha) = (model.coeffs.beta, model.coeffs.alpha_d);
    let two_n = 2.0 * model.n();
    let dx = grid[1] - grid[0];
    let m = grid.len() - 1;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * alpha * t).sqrt();
    let mirrored: Vec<f64> = psi
        .weighted
        .iter()
        .zip(grid)
        .map(|(w, &xi)| w * (-2.0 * beta * xi / alpha).exp())
        .collect();

    let mut stale = 0usize;
    let mut n = 0i64;
    loop {
        let mut touched = false;
        let signed: &[i64] = if n == 0 { &[0] } else { &[n, -n] };
        for &n_signed in signed {
            let image = two_n * n_signed as f64;
            // Direct family: argument (i - k) dx - image - beta t.
            {
                let pref = beta * image / alpha;
                let reach_sq = 2.0 * alpha * t * (TERM_EXPONENT_BOUND + pref);
                if reach_sq > 0.0 {
                    let reach = reach_sq.sqrt().max(dx);
                    let width = (alpha * t).sqrt();
                    let center = image + beta * t;
                    let o_lo = (((center - reach) / dx).ceil() as i64).max(-(m as i64));
                    let o_hi = (((center + reach) / dx).floor() as i64).min(m as i64);
                    if o_lo <= o_hi {
                        touched = true;
                        let scale = norm * pref.exp();
                        for o in o_lo..=o_hi {
                            let dev = o as f64 * dx - center;
                            let g = scale * gaussian_cell(dev, width, dx);
                            if g == 0.0 {
                                continue;
                            }
                            // Keep i = o + k and k both interior.
                            let k_lo = (1 - o).max(1) as usize;
                            let k_hi = ((m as i64 - 1 - o).min(m as i64 - 1)).max(0) as usize;
                            for k in k_lo..=k_hi {
                                out[(o + k as i64) as usize] += g * psi.weighted[k];
                            }
                        }
                    }
                }
            }
            // Mirrored family: argument (i + k) dx + image - beta t, with the
            // exp(-2 beta xi / alpha) weight folded into `mirrored`.
            {
                let pref = -beta * image / alpha;
                // The xi-dependent weight is bounded by exp(2|beta| N / alpha).
                let bound = TERM_EXPONENT_BOUND + 2.0 * beta.abs() * model.n() / alpha;
                let reach_sq = 2.0 * alpha * t * (bound + pref);
                if reach_sq > 0.0 {
                    let reach = reach_sq.sqrt().max(dx);
                    let width = (alpha * t).sqrt();
                    let center = -image + beta * t;
                    let s_lo = (((center - reach) / dx).ceil() as i64).max(0);
                    let s_hi = (((center + reach) / dx).floor() as i64).min(2 * m as i64);
                    if s_lo <= s_hi {
                        touched = true;
                        let scale = norm * pref.exp();
                        for s in s_lo..=s_hi {
                            let dev = s as f64 * dx - center;
                            let g = scale * gaussian_cell(dev, width, dx);
                            if g == 0.0 {
                                continue;
                            }
                            // Keep i = s - k and k both interior.
                            let k_lo = (s - m as i64 + 1).max(1) as usize;
                            let k_hi = ((s - 1).min(m as i64 - 1)).max(0) as usize;
                            for k in k_lo..=k_hi {
                                out[(s - k as i64) as usize] -= g * mirrored[k];
                            }
                        }
                    }
                }
            }
        }
        if touched {
            stale = 0;
        } else {
            stale += 1;
            if stale >= 2 {
                break;
            }
        }
        n += 1;
        if n as usize > model.series_cutoff {
            return Err(Error::SeriesTruncation {
                cutoff: model.series_cutoff,
                t,
            });
        }
    }
    Ok(())
}

/// Barrier-entry intensities of the initial density at every step time,
/// via the closed inverse-Gaussian-flux form of the image series (paired
/// terms), mirrored for the far barrier.
fn psi_passage_kernels(
    grid: &[f64],
    psi: &PsiWeights,
    h: f64,
    steps: usize,
    model: &TwoBarrierModel,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (beta, alpha) = (model.coeffs.beta, model.coeffs.alpha_d);
    let n_len = model.n();
    let two_n = 2.0 * n_len;
    let mut to0 = vec![0.0; steps + 1];
    let mut to_n = vec![0.0; steps + 1];
    // Zero-lag limits: diffusive flux of the density into each barrier.
    to0[0] = 0.5 * alpha * psi.slope0;
    to_n[0] = 0.5 * alpha * psi.slope_n;

    // gamma_{xi,0}(t) = sum_n (xi + 2nN)/t * N(...) with drift beta;
    // gamma_{xi,N}(t) mirrors it with xi -> N - xi, beta -> -beta.
    let flux = |drift: f64, into_n: &mut Vec<f64>, mirror: bool| -> Result<()> {
        for j in 1..=steps {
            let t = j as f64 * h;
            let norm = (-drift * drift * t / (2.0 * alpha)).exp()
                / (2.0 * std::f64::consts::PI * alpha * t).sqrt()
                / t;
            let reach = (2.0 * alpha * t
                * (TERM_EXPONENT_BOUND + drift.abs() * n_len / alpha))
                .sqrt();
            let mut acc = 0.0;
            let mut n_img = ((-n_len - reach) / two_n).floor() as i64;
            let n_hi = (reach / two_n).ceil() as i64;
            if (n_hi - n_img) as usize > 2 * model.series_cutoff + 2 {
                return Err(Error::SeriesTruncation {
                    cutoff: model.series_cutoff,
                    t,
                });
            }
            while n_img <= n_hi {
                let shift = two_n * n_img as f64;
                for (k, &w) in psi.weighted.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let xi = if mirror { n_len - grid[k] } else { grid[k] };
                    let u = xi + shift;
                    if u.abs() > reach {
                        continue;
                    }
                    let exponent = -drift * xi / alpha - u * u / (2.0 * alpha * t);
                    if exponent > -TERM_EXPONENT_BOUND {
                        acc += w * u * exponent.exp();
                    }
                }
                n_img += 1;
            }
            into_n[j] = acc * norm;
        }
        Ok(())
    };
    flux(beta, &mut to0, false)?;
    flux(-beta, &mut to_n, true)?;
    Ok((to0, to_n))
}

/// First-passage kernels from the interior part of the initial condition
/// (mass-weighted, so no separate normalization factor is needed).
fn interior_passage_kernels(
    grid: &[f64],
    initial: &InitialCondition,
    h: f64,
    steps: usize,
    model: &TwoBarrierModel,
) -> Result<(Vec<f64>, Vec<f64>)> {
    match &initial.interior {
        InteriorStart::None => Ok((vec![0.0; steps + 1], vec![0.0; steps + 1])),
        InteriorStart::Point { x0, mass } => {
            let mut to0 = vec![0.0; steps + 1];
            let mut to_n = vec![0.0; steps + 1];
            for j in 1..=steps {
                let (a, b) = first_passage_pair(j as f64 * h, *x0, model)?;
                to0[j] = mass * a;
                to_n[j] = mass * b;
            }
            Ok((to0, to_n))
        }
        InteriorStart::Sampled { xs, density } => {
            let psi = psi_weights(grid, xs, density);
            psi_passage_kernels(grid, &psi, h, steps, model)
        }
    }
}

/// Product-integration convolution `(f * k)(t_j)`: the kernel enters through
/// exact cell integrals `cells[r]` over `[(r-1)h, rh]`, the smooth factor
/// through its cell-averaged samples. The final cell would need `f[j]`,
/// which is not known yet while marching, so it falls back to `f[j-1]`.
fn conv_cells(f: &[f64], cells: &[f64], j: usize, lag_final: bool) -> f64 {
    let mut acc = 0.0;
    for m in 0..j {
        let f_right = if m + 1 == j && lag_final { f[m] } else { f[m + 1] };
        acc += 0.5 * (f[m] + f_right) * cells[j - m];
    }
    acc
}

/// Trapezoid convolution for kernels smooth at zero lag (survival
/// functions).
fn conv_full(f: &[f64], kernel: &[f64], j: usize, h: f64) -> f64 {
    let mut acc = 0.5 * (f[0] * kernel[j] + f[j] * kernel[0]);
    for m in 1..j {
        acc += f[m] * kernel[j - m];
    }
    acc * h
}

impl<'m> VolterraMarch<'m> {
    fn run(model: &'m TwoBarrierModel, initial: &InitialCondition, horizon: f64) -> Result<Self> {
        initial.validate().map_err(|_| Error::InvalidParameter {
            field: "initial condition",
            reason: format!("total mass {} must be 1", initial.total_mass()),
        })?;
        let steps = (horizon / model.time_step).ceil().max(1.0) as usize;
        let h = horizon / steps as f64;
        let grid = model.grid();

        let from_1 = passage_kernel(1.0, h, steps, model)?;
        let from_m = passage_kernel(model.n() - 1.0, h, steps, model)?;
        let psi = match &initial.interior {
            InteriorStart::Sampled { xs, density } => Some(psi_weights(&grid, xs, density)),
            _ => None,
        };
        let (k_psi_0, k_psi_n) = match (&psi, &initial.interior) {
            (Some(p), _) => psi_passage_kernels(&grid, p, h, steps, model)?,
            (None, _) => interior_passage_kernels(&grid, initial, h, steps, model)?,
        };

        let l0: Vec<f64> = (0..=steps).map(|j| model.l0.density(j as f64 * h)).collect();
        let l_n: Vec<f64> = (0..=steps).map(|j| model.l_n.density(j as f64 * h)).collect();

        // Survival of the initial interior mass: cumulative trapezoid of the
        // (pointwise) psi passage kernels. A spread-out psi makes these
        // kernels broad in time, so the trapezoid is adequate here.
        let surv_psi: Vec<f64> = {
            let mut out = Vec::with_capacity(steps + 1);
            let mut acc = initial.interior_mass();
            out.push(acc);
            for j in 1..=steps {
                acc -= 0.5
                    * h
                    * (k_psi_0[j] + k_psi_n[j] + k_psi_0[j - 1] + k_psi_n[j - 1]);
                out.push(acc.max(0.0));
            }
            out
        };

        let atom0 = initial.p0;
        let atom_n = initial.p_n;
        let mut gamma0 = vec![0.0; steps + 1];
        let mut gamma_n = vec![0.0; steps + 1];
        let mut g1 = vec![0.0; steps + 1];
        let mut g_n1 = vec![0.0; steps + 1];
        let mut p0 = vec![0.0; steps + 1];
        let mut p_n = vec![0.0; steps + 1];

        // Zero-lag entry intensity of the initial interior density (its
        // boundary flux); the jump intensities start from the atoms alone.
        gamma0[0] = k_psi_0[0];
        gamma_n[0] = k_psi_n[0];
        g1[0] = atom0 * l0[0];
        g_n1[0] = atom_n * l_n[0];
        p0[0] = atom0;
        p_n[0] = atom_n;

        for j in 1..=steps {
            gamma0[j] = k_psi_0[j]
                + conv_cells(&g1, &from_1.cells_to0, j, true)
                + conv_cells(&g_n1, &from_m.cells_to0, j, true);
            gamma_n[j] = k_psi_n[j]
                + conv_cells(&g1, &from_1.cells_to_n, j, true)
                + conv_cells(&g_n1, &from_m.cells_to_n, j, true);
            // Jump intensities: the initial atoms enter the sojourn
            // convolution as impulses of weight 1 at step 0.
            g1[j] = atom0 * l0[j] + conv_full(&gamma0, &l0, j, h);
            g_n1[j] = atom_n * l_n[j] + conv_full(&gamma_n, &l_n, j, h);

            p0[j] = p0[j - 1] + 0.5 * h * (gamma0[j] - g1[j] + gamma0[j - 1] - g1[j - 1]);
            p_n[j] = p_n[j - 1] + 0.5 * h * (gamma_n[j] - g_n1[j] + gamma_n[j - 1] - g_n1[j - 1]);

            let interior_mass = surv_psi[j]
                + conv_full(&g1, &from_1.survival, j, h)
                + conv_full(&g_n1, &from_m.survival, j, h);
            let defect = (p0[j] + p_n[j] + interior_mass - 1.0).abs();
            if defect > 5e-3 {
                return Err(Error::DivergentEvolution {
                    step: j,
                    t: j as f64 * h,
                    mass_error: defect,
                });
            }
        }

        Ok(Self {
            model,
            h,
            steps,
            atom0,
            atom_n,
            initial: initial.clone(),
            psi,
            g1,
            g_n1,
            p0,
            p_n,
        })
    }

    /// Assembles the interior density at step `j` on the model grid.
    ///
    /// Jump contributions use product integration: Simpson cell integrals of
    /// the jump kernel against the trapezoid-averaged intensity. Folding the
    /// per-cell Simpson weights first leaves one Gaussian-table row per
    /// half-step, each evaluated once with its combined coefficient. The
    /// freshest cell uses the midpoint rule because its zero-lag endpoint is
    /// the jump-target point mass.
    fn assemble(&self, j: usize) -> Result<QueueDensity> {
        let xs = self.model.grid();
        let t = j as f64 * self.h;
        let mut interior = vec![0.0; xs.len()];

        if j == 0 {
            match &self.initial.interior {
                InteriorStart::None => {}
                InteriorStart::Sampled { xs: ixs, density } => {
                    // Re-sample onto the model grid.
                    for (i, &x) in xs.iter().enumerate() {
                        interior[i] = sample_linear(ixs, density, x);
                    }
                }
                InteriorStart::Point { x0, mass } => {
                    // Represent the atom as a one-cell spike; exact point
                    // masses only exist at t = 0.
                    let dx = xs[1] - xs[0];
                    let idx = ((x0 / dx).round() as usize).min(xs.len() - 1);
                    interior[idx] = mass / dx;
                }
            }
            return Ok(QueueDensity {
                t: 0.0,
                xs,
                interior,
                p0: self.atom0,
                p_n: self.atom_n,
            });
        }

        match (&self.psi, &self.initial.interior) {
            (Some(psi), _) => add_psi_pdf_row(&xs, t, psi, self.model, &mut interior)?,
            (None, InteriorStart::Point { x0, mass }) => {
                add_pdf_row(&xs, t, *x0, *mass, self.model, &mut interior)?
            }
            (None, _) => {}
        }

        let n = self.model.n();
        let h = self.h;
        for (g, target) in [(&self.g1, 1.0), (&self.g_n1, n - 1.0)] {
            // coef[k] multiplies the kernel row at sigma = k h / 2.
            let mut coef = vec![0.0; 2 * j + 1];
            for m in 0..j {
                let w = 0.5 * (g[m] + g[m + 1]);
                if w == 0.0 {
                    continue;
                }
                let r = j - m;
                if r == 1 {
                    coef[1] += h * w;
                } else {
                    coef[2 * r - 2] += h / 6.0 * w;
                    coef[2 * r - 1] += 4.0 * h / 6.0 * w;
                    coef[2 * r] += h / 6.0 * w;
                }
            }
            for (k, &c) in coef.iter().enumerate().skip(1) {
                if c != 0.0 {
                    add_pdf_row(&xs, 0.5 * h * k as f64, target, c, self.model, &mut interior)?;
                }
            }
        }

        for value in interior.iter_mut() {
            if *value < -1e-6 {
                return Err(Error::ExcessiveClipping { clipped: -*value });
            }
            *value = value.max(0.0);
        }

        Ok(QueueDensity {
            t,
            xs,
            interior,
            p0: self.p0[j].clamp(0.0, 1.0),
            p_n: self.p_n[j].clamp(0.0, 1.0),
        })
    }
}

fn sample_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let idx = xs.partition_point(|&v| v < x).max(1);
    let (x0, x1) = (xs[idx - 1], xs[idx]);
    let w = (x - x0) / (x1 - x0);
    ys[idx - 1] * (1.0 - w) + ys[idx] * w
}

/// Evolves the two-barrier return process over `[0, horizon]`, returning
/// the density on every step of the internal grid (including t = 0).
///
/// Mass conservation is enforced at every step; a defect beyond 5e-3 aborts
/// with [`Error::DivergentEvolution`].
pub fn evolve(
    model: &TwoBarrierModel,
    initial: &InitialCondition,
    horizon: f64,
) -> Result<Vec<QueueDensity>> {
    let march = VolterraMarch::run(model, initial, horizon)?;
    (0..=march.steps).map(|j| march.assemble(j)).collect()
}

/// Like [`evolve`] but assembles only the final density; the march and its
/// per-step mass checks still cover the whole horizon. This is the fast path
/// for piecewise-constant stepping where only the end state restarts the
/// next interval.
pub fn evolve_last(
    model: &TwoBarrierModel,
    initial: &InitialCondition,
    horizon: f64,
) -> Result<QueueDensity> {
    let march = VolterraMarch::run(model, initial, horizon)?;
    march.assemble(march.steps)
}

/// Mean queue length of a density snapshot (boundary atoms included).
pub fn mean_queue(density: &QueueDensity) -> f64 {
    density.mean_queue()
}
