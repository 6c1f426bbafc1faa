//! Orthonormal (probabilist's) Hermite polynomials under the standard Gaussian measure.
//!
//! `H_k` here is `He_k / sqrt(k!)`, so `E[H_i(X) H_j(X)] = δ_ij` for `X ~ N(0, 1)`.
//! Everything is evaluated with the three-term recurrence
//!
//! ```text
//! sqrt(k + 1) H_{k+1}(x) = x H_k(x) - sqrt(k) H_{k-1}(x)
//! ```
//!
//! which stays well conditioned for degrees in the thousands as long as
//! `|x|` is `O(sqrt(k))`.

mod expansion;
mod quadrature;

pub(crate) use expansion::ExpansionEvaluator;
pub use expansion::{enumerate_multi_indices, HermiteExpansion, MultiIndex};
pub use quadrature::{expectation, gauss_hermite_rule, QuadratureRule, DEFAULT_NODE_CAP};

use crate::error::{Error, Result};

/// `H_k(x)`.
pub fn hermite_eval(k: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = x;
    for j in 1..k {
        let next = (x * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out` with `H_0(x), ..., H_kmax(x)`.
pub fn hermite_table_into(kmax: usize, x: f64, out: &mut Vec<f64>) {
    out.clear();
    out.reserve(kmax + 1);
    out.push(1.0);
    if kmax == 0 {
        return;
    }
    out.push(x);
    for j in 1..kmax {
        let next = (x * out[j] - (j as f64).sqrt() * out[j - 1]) / ((j + 1) as f64).sqrt();
        out.push(next);
    }
}

/// `[H_0(x), ..., H_kmax(x)]`.
pub fn hermite_table(kmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(kmax + 1);
    hermite_table_into(kmax, x, &mut out);
    out
}

/// Exact `H_k(0)`: zero for odd `k`, `(-1)^m (2m-1)!! / sqrt((2m)!)` for `k = 2m`.
///
/// Uses `H_{2m}(0) = -H_{2m-2}(0) sqrt((2m-1)/(2m))`, so nothing overflows.
pub fn hermite_zero(k: usize) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    let mut value = 1.0;
    for m in 1..=k / 2 {
        value = -value * ((2 * m - 1) as f64 / (2 * m) as f64).sqrt();
    }
    value
}

/// `H_alpha(x) = prod_i H_{alpha_i}(x_i)`.
pub fn hermite_multi_eval(alpha: &MultiIndex, x: &[f64]) -> Result<f64> {
    if alpha.dimension() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: alpha.dimension(),
            got: x.len(),
        });
    }
    Ok(alpha
        .exponents()
        .iter()
        .zip(x)
        .map(|(&k, &xi)| hermite_eval(k as usize, xi))
        .product())
}

/// `E[∂^beta g(X)] / sqrt(beta!)`, which equals the Hermite coefficient
/// `<g, H_beta>` for smooth `g` with integrable derivatives.
///
/// `derivative(beta, x)` must return `∂^beta g(x)`.
pub fn coeff_via_derivatives<F>(
    derivative: F,
    beta: &MultiIndex,
    rule: &QuadratureRule,
) -> Result<f64>
where
    F: Fn(&MultiIndex, &[f64]) -> f64,
{
    if beta.dimension() != rule.dimension() {
        return Err(Error::DimensionMismatch {
            expected: rule.dimension(),
            got: beta.dimension(),
        });
    }
    let mean = expectation(|x| derivative(beta, x), rule)?;
    Ok(mean * (-0.5 * beta.ln_factorial()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn low_degree_values() {
        assert_eq!(hermite_eval(0, 3.7), 1.0);
        assert_eq!(hermite_eval(1, 1.5), 1.5);
        assert_abs_diff_eq!(hermite_eval(2, 0.0), -1.0 / 2f64.sqrt(), epsilon = 1e-15);
        // (x^3 - 3x) / sqrt(6)
        assert_abs_diff_eq!(hermite_eval(3, 1.0), -2.0 / 6f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn zeros() {
        assert_eq!(hermite_zero(1), 0.0);
        assert_eq!(hermite_zero(0), 1.0);
        assert_abs_diff_eq!(hermite_zero(4), 3.0 / 24f64.sqrt(), epsilon = 1e-15);
        for k in 0..=200 {
            assert_abs_diff_eq!(hermite_zero(k), hermite_eval(k, 0.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn table_matches_pointwise() {
        let t = hermite_table(30, 1.3);
        for (k, v) in t.iter().enumerate() {
            assert_eq!(*v, hermite_eval(k, 1.3));
        }
    }

    #[test]
    fn multi_eval() {
        let a = MultiIndex::new(vec![0, 0, 0]);
        assert_eq!(hermite_multi_eval(&a, &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        let a = MultiIndex::new(vec![1, 1]);
        assert_eq!(hermite_multi_eval(&a, &[2.0, 3.0]).unwrap(), 6.0);
        let a = MultiIndex::new(vec![2, 0]);
        assert_abs_diff_eq!(
            hermite_multi_eval(&a, &[0.0, 9.9]).unwrap(),
            -1.0 / 2f64.sqrt(),
            epsilon = 1e-15
        );
        assert!(matches!(
            hermite_multi_eval(&a, &[0.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
    }
}
