//! Tensor Gauss–Hermite rules for expectations under `N(0, I_n)`.
//!
//! Nodes come from the eigenvalues of the Jacobi matrix of the orthonormal
//! recurrence (off-diagonal `sqrt(k)`), computed with implicit QL while only
//! tracking the first row of the eigenvector matrix. Nodes are then polished
//! with Newton on `H_m` and weights taken from the Christoffel numbers
//! `1 / (m H_{m-1}(x_i)^2)`.

use super::hermite_eval;
use crate::error::{Error, Result};

/// Default ceiling on the number of tensor nodes.
pub const DEFAULT_NODE_CAP: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    dimension: usize,
    // Row-major, `dimension` coordinates per node.
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Builds a rule from explicit points; weights must be positive and sum to one.
    pub fn from_parts(dimension: usize, nodes: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("dimension", "must be positive"));
        }
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(Error::invalid(
                "weights",
                "need one positive weight per node",
            ));
        }
        let mut flat = Vec::with_capacity(nodes.len() * dimension);
        for n in &nodes {
            if n.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    got: n.len(),
                });
            }
            flat.extend_from_slice(n);
        }
        if weights
            .iter()
            .any(|&w| w.is_nan() || w <= 0.0 || !w.is_finite())
        {
            return Err(Error::invalid("weights", "must be positive and finite"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "weights",
                format!("sum to {total}, expected 1"),
            ));
        }
        Ok(QuadratureRule {
            dimension,
            nodes: flat,
            weights,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.nodes
            .chunks_exact(self.dimension)
            .zip(self.weights.iter().copied())
    }
}

/// Tensorized Gauss–Hermite rule with `points_per_axis` nodes on each of
/// `dimension` axes, normalized to the standard Gaussian measure.
pub fn gauss_hermite_rule(points_per_axis: usize, dimension: usize) -> Result<QuadratureRule> {
    gauss_hermite_rule_with_cap(points_per_axis, dimension, DEFAULT_NODE_CAP)
}

pub fn gauss_hermite_rule_with_cap(
    points_per_axis: usize,
    dimension: usize,
    node_cap: usize,
) -> Result<QuadratureRule> {
    if points_per_axis == 0 {
        return Err(Error::invalid("points_per_axis", "must be at least 1"));
    }
    if dimension == 0 {
        return Err(Error::invalid("dimension", "must be positive"));
    }
    let requested = (points_per_axis as u128)
        .checked_pow(dimension as u32)
        .unwrap_or(u128::MAX);
    if requested > node_cap as u128 {
        return Err(Error::NodeCapExceeded {
            requested,
            cap: node_cap,
        });
    }
    let (x1, w1) = gauss_hermite_1d(points_per_axis);
    let count = x1.len().pow(dimension as u32);
    let mut nodes = Vec::with_capacity(count * dimension);
    let mut weights = Vec::with_capacity(count);
    let mut idx = vec![0usize; dimension];
    for _ in 0..count {
        let mut w = 1.0;
        for &i in &idx {
            nodes.push(x1[i]);
            w *= w1[i];
        }
        weights.push(w);
        // odometer, last axis fastest
        for axis in (0..dimension).rev() {
            idx[axis] += 1;
            if idx[axis] < x1.len() {
                break;
            }
            idx[axis] = 0;
        }
    }
    // Drop nodes whose weight underflowed; the rule keeps strictly positive weights.
    if weights.contains(&0.0) {
        let mut kept_nodes = Vec::with_capacity(nodes.len());
        let mut kept_weights = Vec::with_capacity(weights.len());
        for (n, &w) in nodes.chunks_exact(dimension).zip(&weights) {
            if w > 0.0 {
                kept_nodes.extend_from_slice(n);
                kept_weights.push(w);
            }
        }
        nodes = kept_nodes;
        weights = kept_weights;
    }
    Ok(QuadratureRule {
        dimension,
        nodes,
        weights,
    })
}

/// `E[f(X)] ≈ sum_i w_i f(x_i)`; fails on the first non-finite value.
pub fn expectation<F>(f: F, rule: &QuadratureRule) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut acc = 0.0;
    for (x, w) in rule.iter() {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                point: x.to_vec(),
                value: v,
            });
        }
        acc += w * v;
    }
    Ok(acc)
}

/// Symmetric one-dimensional rule: ascending nodes and weights summing to one.
pub(crate) fn gauss_hermite_1d(m: usize) -> (Vec<f64>, Vec<f64>) {
    if m == 1 {
        return (vec![0.0], vec![1.0]);
    }
    let mut diag = vec![0.0; m];
    let mut off: Vec<f64> = (1..m).map(|k| (k as f64).sqrt()).collect();
    off.push(0.0);
    let mut first_row = vec![0.0; m];
    first_row[0] = 1.0;
    tridiagonal_ql(&mut diag, &mut off, &mut first_row);

    let mut pairs: Vec<(f64, f64)> = diag
        .into_iter()
        .zip(first_row.into_iter().map(|z| z * z))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let sqrt_m = (m as f64).sqrt();
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for (mut x, w_ql) in pairs {
        for _ in 0..2 {
            let hm = hermite_eval(m, x);
            let dh = sqrt_m * hermite_eval(m - 1, x);
            if !(hm.is_finite() && dh.is_finite()) || dh == 0.0 {
                break;
            }
            let step = hm / dh;
            if step.abs() > 1e-6 * (1.0 + x.abs()) {
                break;
            }
            x -= step;
        }
        let h = hermite_eval(m - 1, x);
        let w = if h.is_finite() {
            1.0 / (m as f64 * h * h)
        } else {
            w_ql
        };
        nodes.push(x);
        weights.push(if w.is_finite() { w } else { w_ql });
    }

    // Enforce exact mirror symmetry.
    for i in 0..m / 2 {
        let j = m - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    (nodes, weights)
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
///
/// `diag` becomes the eigenvalues; `off[i]` couples rows `i` and `i + 1`
/// (last entry ignored). `row` is one row of the accumulated eigenvector
/// matrix, rotated alongside.
fn tridiagonal_ql(diag: &mut [f64], off: &mut [f64], row: &mut [f64]) {
    let n = diag.len();
    if n < 2 {
        return;
    }
    off[n - 1] = 0.0;
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            assert!(iterations < 200, "tridiagonal QL failed to converge");
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                let z1 = row[i + 1];
                row[i + 1] = s * row[i] + c * z1;
                row[i] = c * row[i] - s * z1;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_node() {
        let r = gauss_hermite_rule(1, 1).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.node(0), &[0.0]);
        assert_eq!(r.weights(), &[1.0]);
    }

    #[test]
    fn three_point_rule() {
        // He_3 roots: 0, ±sqrt(3); weights 2/3, 1/6.
        let (x, w) = gauss_hermite_1d(3);
        assert_abs_diff_eq!(x[2], 3f64.sqrt(), epsilon = 1e-14);
        assert_eq!(x[1], 0.0);
        assert_abs_diff_eq!(w[1], 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w[0], 1.0 / 6.0, epsilon = 1e-14);
    }

    #[test]
    fn moments_and_normalization() {
        for m in [2, 5, 8, 40, 200, 400] {
            let r = gauss_hermite_rule(m, 1).unwrap();
            assert_abs_diff_eq!(r.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(
                expectation(|x| x[0] * x[0], &r).unwrap(),
                1.0,
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(expectation(|x| x[0], &r).unwrap(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn node_cap() {
        assert!(matches!(
            gauss_hermite_rule(200, 3),
            Err(Error::NodeCapExceeded {
                requested: 8_000_000,
                ..
            })
        ));
        assert!(gauss_hermite_rule_with_cap(3, 2, 8).is_err());
        assert_eq!(gauss_hermite_rule_with_cap(3, 2, 9).unwrap().len(), 9);
    }

    #[test]
    fn non_finite_reports_node() {
        let r = gauss_hermite_rule(3, 1).unwrap();
        let err = expectation(|x| 1.0 / x[0], &r).unwrap_err();
        assert!(matches!(err, Error::NonFinite { ref point, .. } if point == &vec![0.0]));
    }

    #[test]
    fn from_parts_validates() {
        assert!(QuadratureRule::from_parts(1, vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).is_ok());
        assert!(QuadratureRule::from_parts(1, vec![vec![0.0], vec![1.0]], vec![0.5, 0.4]).is_err());
        assert!(QuadratureRule::from_parts(1, vec![vec![0.0]], vec![0.0]).is_err());
    }
}
