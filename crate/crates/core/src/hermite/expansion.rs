use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::hermite_table_into;
use crate::error::{Error, Result};

/// Exponent vector `alpha` of a multivariate Hermite polynomial `H_alpha`.
///
/// Ordering is lexicographic on the exponents, which is also the order terms
/// are serialized in.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(dimension: usize) -> Self {
        MultiIndex(vec![0; dimension])
    }

    /// Single-axis index `(k)` in one dimension.
    pub fn univariate(k: u32) -> Self {
        MultiIndex(vec![k])
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    /// `|alpha| = sum_i alpha_i`.
    pub fn degree(&self) -> usize {
        self.0.iter().map(|&a| a as usize).sum()
    }

    /// `ln(alpha!) = sum_i ln(alpha_i!)`.
    pub fn ln_factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&a| (2..=a).map(|j| (j as f64).ln()).sum::<f64>())
            .sum()
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// All multi-indices of length `dimension` with total degree at most `max_degree`,
/// grouped by total degree and lexicographically descending inside each group.
pub fn enumerate_multi_indices(dimension: usize, max_degree: usize) -> Vec<MultiIndex> {
    fn fill(rest: usize, budget: usize, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if rest == 1 {
            prefix.push(budget as u32);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for a in (0..=budget).rev() {
            prefix.push(a as u32);
            fill(rest - 1, budget - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if dimension == 0 {
        return out;
    }
    let mut prefix = Vec::with_capacity(dimension);
    for degree in 0..=max_degree {
        fill(dimension, degree, &mut prefix, &mut out);
    }
    out
}

/// A finite Hermite expansion `sum_alpha c_alpha H_alpha` in a fixed dimension.
///
/// Zero coefficients are never stored, so two expansions are equal exactly
/// when they hold the same keys with bit-identical coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteExpansion {
    dimension: usize,
    terms: BTreeMap<MultiIndex, f64>,
    degree_bound: usize,
}

impl HermiteExpansion {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("dimension", "must be positive"));
        }
        Ok(HermiteExpansion {
            dimension,
            terms: BTreeMap::new(),
            degree_bound: 0,
        })
    }

    /// Builds an expansion, summing repeated keys and dropping zeros.
    pub fn from_terms<I>(dimension: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut p = Self::new(dimension)?;
        for (alpha, c) in terms {
            p.add_term(alpha, c)?;
        }
        Ok(p)
    }

    /// Convenience for one-dimensional expansions `sum_k c_k H_k`.
    pub fn univariate<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (u32, f64)>,
    {
        Self::from_terms(
            1,
            terms
                .into_iter()
                .map(|(k, c)| (MultiIndex::univariate(k), c)),
        )
        .expect("one-dimensional keys always match")
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Largest `|alpha|` among stored terms (0 when empty).
    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(a, &c)| (a, c))
    }

    fn check_key(&self, alpha: &MultiIndex) -> Result<()> {
        if alpha.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: alpha.dimension(),
            });
        }
        Ok(())
    }

    fn refresh_degree(&mut self) {
        self.degree_bound = self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0);
    }

    /// Sets the coefficient of `alpha`, removing the key when `coeff == 0`.
    pub fn set(&mut self, alpha: MultiIndex, coeff: f64) -> Result<()> {
        self.check_key(&alpha)?;
        if !coeff.is_finite() {
            return Err(Error::invalid("coefficient", format!("{coeff} at {alpha}")));
        }
        if coeff == 0.0 {
            if self.terms.remove(&alpha).is_some() {
                self.refresh_degree();
            }
        } else {
            self.degree_bound = self.degree_bound.max(alpha.degree());
            self.terms.insert(alpha, coeff);
        }
        Ok(())
    }

    pub fn add_term(&mut self, alpha: MultiIndex, coeff: f64) -> Result<()> {
        let current = self.coeff(&alpha);
        self.set(alpha, current + coeff)
    }

    /// Applies `f(alpha, c)` to every coefficient; zeros that result are dropped.
    pub fn map_coefficients<F>(&self, mut f: F) -> Self
    where
        F: FnMut(&MultiIndex, f64) -> f64,
    {
        let terms: BTreeMap<_, _> = self
            .terms
            .iter()
            .filter_map(|(a, &c)| {
                let v = f(a, c);
                (v != 0.0).then(|| (a.clone(), v))
            })
            .collect();
        let mut out = HermiteExpansion {
            dimension: self.dimension,
            terms,
            degree_bound: 0,
        };
        out.refresh_degree();
        out
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map_coefficients(|_, c| c * factor)
    }

    /// Projection onto `span{H_alpha : |alpha| <= d}`.
    pub fn truncate(&self, d: usize) -> Self {
        if d >= self.degree_bound {
            return self.clone();
        }
        let terms: BTreeMap<_, _> = self
            .terms
            .iter()
            .filter(|(a, _)| a.degree() <= d)
            .map(|(a, &c)| (a.clone(), c))
            .collect();
        let mut out = HermiteExpansion {
            dimension: self.dimension,
            terms,
            degree_bound: 0,
        };
        out.refresh_degree();
        out
    }

    /// `sqrt(sum_alpha c_alpha^2)`, the `L2(N_n)` norm by Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.terms.values().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if other.dimension != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: other.dimension,
            });
        }
        let mut out = self.clone();
        for (a, &c) in &other.terms {
            out.add_term(a.clone(), -c)?;
        }
        Ok(out)
    }

    /// Highest exponent used on each axis.
    pub fn axis_degrees(&self) -> Vec<usize> {
        let mut out = vec![0; self.dimension];
        for a in self.terms.keys() {
            for (m, &e) in out.iter_mut().zip(a.exponents()) {
                *m = (*m).max(e as usize);
            }
        }
        out
    }

    /// Evaluates the expansion at `x`, computing each axis's `H_0..H_max` once.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        let mut evaluator = ExpansionEvaluator::new(self);
        Ok(evaluator.eval(x))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_wire()).expect("expansion serialization is infallible")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_wire())
            .expect("expansion serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let wire: ExpansionWire = serde_json::from_str(s)?;
        Self::from_wire(wire)
    }

    pub(crate) fn to_wire(&self) -> ExpansionWire {
        ExpansionWire {
            dimension: self.dimension,
            terms: self
                .terms
                .iter()
                .map(|(a, &c)| TermWire {
                    alpha: a.clone(),
                    coeff: c,
                })
                .collect(),
        }
    }

    pub(crate) fn from_wire(wire: ExpansionWire) -> Result<Self> {
        let mut p = Self::new(wire.dimension)?;
        for t in wire.terms {
            p.check_key(&t.alpha)?;
            if p.terms.contains_key(&t.alpha) {
                return Err(Error::invalid(
                    "terms",
                    format!("duplicate alpha {}", t.alpha),
                ));
            }
            p.set(t.alpha, t.coeff)?;
        }
        Ok(p)
    }
}

impl Serialize for HermiteExpansion {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_wire().serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermiteExpansion {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = ExpansionWire::deserialize(d)?;
        Self::from_wire(wire).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct ExpansionWire {
    dimension: usize,
    terms: Vec<TermWire>,
}

#[derive(Serialize, Deserialize)]
struct TermWire {
    alpha: MultiIndex,
    coeff: f64,
}

/// Reusable evaluation buffers for repeatedly evaluating one expansion.
pub(crate) struct ExpansionEvaluator<'a> {
    p: &'a HermiteExpansion,
    axis_degrees: Vec<usize>,
    tables: Vec<Vec<f64>>,
}

impl<'a> ExpansionEvaluator<'a> {
    pub(crate) fn new(p: &'a HermiteExpansion) -> Self {
        let axis_degrees = p.axis_degrees();
        let tables = axis_degrees
            .iter()
            .map(|&m| Vec::with_capacity(m + 1))
            .collect();
        ExpansionEvaluator {
            p,
            axis_degrees,
            tables,
        }
    }

    /// Caller guarantees `x.len() == p.dimension()`.
    pub(crate) fn eval(&mut self, x: &[f64]) -> f64 {
        for ((table, &m), &xi) in self.tables.iter_mut().zip(&self.axis_degrees).zip(x) {
            hermite_table_into(m, xi, table);
        }
        self.p
            .terms
            .iter()
            .map(|(a, &c)| {
                c * a
                    .exponents()
                    .iter()
                    .zip(&self.tables)
                    .map(|(&e, t)| t[e as usize])
                    .product::<f64>()
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn canonical_form_drops_zeros() {
        let mut p = HermiteExpansion::new(2).unwrap();
        p.set(mi(&[1, 2]), 3.0).unwrap();
        assert_eq!(p.degree_bound(), 3);
        p.add_term(mi(&[1, 2]), -3.0).unwrap();
        assert!(p.is_empty());
        assert_eq!(p.degree_bound(), 0);
        assert!(p.set(mi(&[1]), 1.0).is_err());
    }

    #[test]
    fn eval_examples() {
        let p = HermiteExpansion::new(1).unwrap();
        assert_eq!(p.eval(&[4.0]).unwrap(), 0.0);
        let p = HermiteExpansion::univariate([(0, 2.5)]);
        assert_eq!(p.eval(&[7.0]).unwrap(), 2.5);
        let p = HermiteExpansion::univariate([(1, 1.0), (3, 1.0)]);
        assert_abs_diff_eq!(
            p.eval(&[1.0]).unwrap(),
            1.0 - 2.0 / 6f64.sqrt(),
            epsilon = 1e-14
        );
        assert!(p.eval(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn truncate_examples() {
        let p = HermiteExpansion::univariate([(2, 1.0), (5, 3.0)]);
        assert_eq!(p.truncate(p.degree_bound()), p);
        assert_eq!(p.truncate(3), HermiteExpansion::univariate([(2, 1.0)]));
        assert_eq!(p.truncate(3).degree_bound(), 2);
    }

    #[test]
    fn norms() {
        assert_eq!(HermiteExpansion::new(3).unwrap().l2_norm(), 0.0);
        assert_eq!(HermiteExpansion::univariate([(3, -2.0)]).l2_norm(), 2.0);
    }

    #[test]
    fn json_layout() {
        let p = HermiteExpansion::from_terms(2, [(mi(&[1, 0]), 0.1), (mi(&[0, 2]), -3.5)]).unwrap();
        assert_eq!(
            p.to_json(),
            r#"{"dimension":2,"terms":[{"alpha":[0,2],"coeff":-3.5},{"alpha":[1,0],"coeff":0.1}]}"#
        );
        assert_eq!(HermiteExpansion::from_json(&p.to_json()).unwrap(), p);
        assert!(HermiteExpansion::from_json(
            r#"{"dimension":2,"terms":[{"alpha":[1],"coeff":1.0}]}"#
        )
        .is_err());
    }

    #[test]
    fn enumeration_counts() {
        // C(n + d, d)
        assert_eq!(enumerate_multi_indices(1, 30).len(), 31);
        assert_eq!(enumerate_multi_indices(2, 15).len(), 136);
        assert_eq!(enumerate_multi_indices(3, 4).len(), 35);
        let all = enumerate_multi_indices(2, 3);
        assert_eq!(all[0], mi(&[0, 0]));
        assert!(all.windows(2).all(|w| w[0].degree() <= w[1].degree()));
    }
}
