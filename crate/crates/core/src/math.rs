//! Small numeric helpers shared across the solvers.

pub(crate) const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Standard normal density.
#[inline]
pub(crate) fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / SQRT_2PI
}

/// Standard normal survival function 1 - CDF.
#[inline]
pub(crate) fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Log of the normal survival function, valid far into the upper tail where
/// `normal_sf` underflows.
pub(crate) fn ln_normal_sf(z: f64) -> f64 {
    let sf = normal_sf(z);
    if sf > 1e-305 {
        sf.ln()
    } else {
        // Asymptotic expansion of Mills' ratio.
        let z2 = z * z;
        -0.5 * z2 - z.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

/// Composite Simpson rule with `n` subintervals (rounded up to even).
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n.max(2) } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Adaptive Simpson quadrature. Recursion depth is capped, so integrands
/// with jumps converge to the cap's resolution instead of hanging.
pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson3(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson3(fa, flm, fm, m - a);
        let right = simpson3(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson3(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Trapezoid rule over sampled points on a (possibly nonuniform) grid.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn trapz(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let mut acc = 0.0;
    for i in 1..xs.len() {
        acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    }
    acc
}

/// Composite Simpson over a uniformly sampled grid; an odd trailing cell is
/// closed with a trapezoid. Much tighter than [`trapz`] on densities with
/// boundary layers a few cells wide.
pub(crate) fn integrate_grid(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let cells = xs.len().saturating_sub(1);
    if cells == 0 {
        return 0.0;
    }
    let dx = xs[1] - xs[0];
    debug_assert!(
        xs.windows(2)
            .all(|w| ((w[1] - w[0]) - dx).abs() < 1e-9 * dx.abs().max(1e-300)),
        "integrate_grid needs a uniform grid"
    );
    let paired = cells - cells % 2;
    let mut acc = 0.0;
    let mut i = 0;
    while i + 2 <= paired {
        acc += dx / 3.0 * (ys[i] + 4.0 * ys[i + 1] + ys[i + 2]);
        i += 2;
    }
    if cells % 2 == 1 {
        acc += 0.5 * dx * (ys[cells - 1] + ys[cells]);
    }
    acc
}
