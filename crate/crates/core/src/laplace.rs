//! Numerical Laplace inversion with the Gaver-Stehfest algorithm.
//!
//! The inversion evaluates the transform at real points `i * ln 2 / t` and
//! combines them with precomputed coefficients. Accuracy peaks around 12-16
//! terms in double precision; beyond ~20 the alternating coefficients cancel
//! catastrophically, so those orders are rejected.

use crate::error::{Error, Result};

/// Precomputed Stehfest coefficients for a fixed (even) number of terms.
#[derive(Debug, Clone)]
pub struct StehfestTable {
    n_terms: usize,
    v_coeffs: Vec<f64>,
}

/// Default number of terms used by the diffusion solvers.
pub const DEFAULT_STEHFEST_TERMS: usize = 14;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Computes the Stehfest coefficients `V_1..V_n` for an even order.
pub fn stehfest_coeffs(n_terms: usize) -> Result<StehfestTable> {
    if n_terms < 2 || n_terms > 20 || n_terms % 2 != 0 {
        return Err(Error::InvalidStehfestOrder(n_terms));
    }
    let half = n_terms / 2;
    let mut v_coeffs = Vec::with_capacity(n_terms);
    for i in 1..=n_terms {
        let mut sum = 0.0;
        for k in i.div_ceil(2)..=i.min(half) {
            sum += (k as f64).powi(half as i32) * factorial(2 * k)
                / (factorial(half - k)
                    * factorial(k)
                    * factorial(k - 1)
                    * factorial(i - k)
                    * factorial(2 * k - i));
        }
        let sign = if (half + i) % 2 == 0 { 1.0 } else { -1.0 };
        v_coeffs.push(sign * sum);
    }
    Ok(StehfestTable { n_terms, v_coeffs })
}

impl StehfestTable {
    pub fn new(n_terms: usize) -> Result<Self> {
        stehfest_coeffs(n_terms)
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.v_coeffs
    }

    /// Inverts `transform` at time `t > 0`.
    ///
    /// Returns an error if the transform produces a non-finite value at any
    /// of the evaluation points.
    pub fn invert<F: Fn(f64) -> f64>(&self, transform: F, t: f64) -> Result<f64> {
        invert(transform, t, self)
    }
}

/// Evaluates `(ln 2 / t) * sum_i V_i F(i ln2 / t)`.
pub fn invert<F: Fn(f64) -> f64>(transform: F, t: f64, table: &StehfestTable) -> Result<f64> {
    debug_assert!(t > 0.0, "inversion time must be positive");
    let ln2_t = std::f64::consts::LN_2 / t;
    let mut acc = 0.0;
    for (i, v) in table.v_coeffs.iter().enumerate() {
        let s = (i + 1) as f64 * ln2_t;
        let f = transform(s);
        if !f.is_finite() {
            return Err(Error::TransformEval { s });
        }
        acc += v * f;
    }
    Ok(acc * ln2_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn order_two_coefficients() {
        // Hand evaluation of the coefficient formula at n = 2: V = (2, -2).
        let table = stehfest_coeffs(2).unwrap();
        assert_relative_eq!(table.coeffs()[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(table.coeffs()[1], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn coefficients_sum_to_zero() {
        for n in (2..=20).step_by(2) {
            let table = stehfest_coeffs(n).unwrap();
            let max = table.coeffs().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let sum: f64 = table.coeffs().iter().sum();
            assert!(
                sum.abs() <= 1e-8 * max,
                "sum {sum} exceeds 1e-8 of max coefficient {max} at n = {n}"
            );
        }
    }

    #[test]
    fn rejects_invalid_orders() {
        for n in [0, 1, 3, 7, 13, 22, 40] {
            assert!(matches!(
                stehfest_coeffs(n),
                Err(Error::InvalidStehfestOrder(_))
            ));
        }
    }

    #[test]
    fn inverts_known_pairs() {
        let table = stehfest_coeffs(14).unwrap();
        for &t in &[0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let one = table.invert(|s| 1.0 / s, t).unwrap();
            assert_relative_eq!(one, 1.0, max_relative = 1e-8);

            let ramp = table.invert(|s| 1.0 / (s * s), t).unwrap();
            assert_relative_eq!(ramp, t, max_relative = 1e-6);

            // Error measured against the pair's unit scale f(0) = 1: the
            // scheme's accuracy floor is absolute, so the deep tail of
            // e^{-t} cannot carry more relative precision than that.
            let decay = table.invert(|s| 1.0 / (s + 1.0), t).unwrap();
            assert!(
                (decay - (-t).exp()).abs() < 1e-4,
                "decay pair at t = {t}: {decay} vs {}",
                (-t).exp()
            );
        }
    }

    #[test]
    fn non_finite_transform_is_reported() {
        let table = stehfest_coeffs(14).unwrap();
        let err = table.invert(|s| 1.0 / (s - s), 1.0).unwrap_err();
        assert!(matches!(err, Error::TransformEval { .. }));
    }

    proptest! {
        #[test]
        fn inversion_is_linear(a in -5.0f64..5.0, b in -5.0f64..5.0, t in 0.2f64..5.0) {
            let table = stehfest_coeffs(14).unwrap();
            let f = |s: f64| 1.0 / s;
            let g = |s: f64| 1.0 / (s + 1.0);
            let combined = table.invert(|s| a * f(s) + b * g(s), t).unwrap();
            let separate = a * table.invert(f, t).unwrap() + b * table.invert(g, t).unwrap();
            // Machine precision relative to the summation's condition number:
            // the alternating V_i are large, so scale by sum |V_i term_i|.
            let ln2_t = std::f64::consts::LN_2 / t;
            let cond: f64 = table
                .coeffs()
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let s = (i + 1) as f64 * ln2_t;
                    (v * (a * f(s) + b * g(s))).abs()
                })
                .sum::<f64>()
                * ln2_t;
            prop_assert!((combined - separate).abs() <= 1e-13 * (1.0 + cond));
        }
    }
}
