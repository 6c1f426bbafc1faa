//! Boolean concepts `f: R^n -> {-1, +1}` and Monte-Carlo estimators of their
//! Gaussian noise sensitivity and Gaussian surface area.
//!
//! Every concept uses `sign(0) = +1`. `K(f)` denotes `{x : f(x) = 1}`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{HermiteExpansion, MultiIndex};
use crate::linalg;
use crate::noise::NoiseLevel;
use crate::stats::{
    self, combined_stderr, derive_seed, fill_standard_normal, normal_pdf, EstimateWithError,
};

const UNIT_TOL: f64 = 1e-12;
const MAX_INTERSECTION_FACETS: usize = 16;

/// `sign` with `sign(0) = +1`.
pub fn sign(v: f64) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConceptKind {
    Halfspace,
    Ptf,
    Ball,
    Intersection,
    Constant,
    Custom,
}

/// `x -> sign(c - <w, x>)` with `||w|| = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    w: Vec<f64>,
    c: f64,
}

impl Halfspace {
    pub fn new(w: Vec<f64>, c: f64) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::invalid("w", "must be non-empty"));
        }
        if !c.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("halfspace", "entries must be finite"));
        }
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::invalid(
                "w",
                format!("norm {norm} is not 1 within {UNIT_TOL:e}"),
            ));
        }
        Ok(Halfspace { w, c })
    }

    /// Normalizes `w` (and scales `c` to match) before construction.
    pub fn normalized(w: Vec<f64>, c: f64) -> Result<Self> {
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::invalid("w", "cannot normalize"));
        }
        let mut w: Vec<f64> = w.into_iter().map(|v| v / norm).collect();
        // Renormalize once more so the unit check cannot fail on rounding.
        let again = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        w.iter_mut().for_each(|v| *v /= again);
        Halfspace::new(w, c / norm)
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    fn margin(&self, x: &[f64]) -> f64 {
        self.c - dot(&self.w, x)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A monomial `coeff * prod_i x_i^powers[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub powers: Vec<u32>,
    pub coeff: f64,
}

/// Converts a polynomial in monomials to its Hermite expansion using
/// `x^m = sum_j m! / (2^j j! (m - 2j)!) sqrt((m - 2j)!) H_{m-2j}(x)`.
pub fn monomials_to_hermite(dimension: usize, monomials: &[Monomial]) -> Result<HermiteExpansion> {
    let mut p = HermiteExpansion::new(dimension)?;
    for mono in monomials {
        if mono.powers.len() != dimension {
            return Err(Error::DimensionMismatch {
                expected: dimension,
                got: mono.powers.len(),
            });
        }
        let mut terms: Vec<(Vec<u32>, f64)> = vec![(Vec::with_capacity(dimension), mono.coeff)];
        for &m in &mono.powers {
            let axis = univariate_power(m);
            let mut next = Vec::with_capacity(terms.len() * axis.len());
            for (prefix, c) in &terms {
                for &(k, a) in &axis {
                    let mut e = prefix.clone();
                    e.push(k);
                    next.push((e, c * a));
                }
            }
            terms = next;
        }
        for (e, c) in terms {
            p.add_term(MultiIndex::new(e), c)?;
        }
    }
    Ok(p)
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn univariate_power(m: u32) -> Vec<(u32, f64)> {
    (0..=m / 2)
        .map(|j| {
            let k = m - 2 * j;
            let ln = ln_factorial(m)
                - j as f64 * std::f64::consts::LN_2
                - ln_factorial(j)
                - 0.5 * ln_factorial(k);
            (k, ln.exp())
        })
        .collect()
}

type EvalFn = dyn Fn(&[f64]) -> i8 + Send + Sync;
type DistanceFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
enum Shape {
    Halfspace(Halfspace),
    Ptf {
        p: HermiteExpansion,
        degree: usize,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Intersection(Vec<Halfspace>),
    Constant(i8),
    Custom {
        eval: Arc<EvalFn>,
        distance: Option<Arc<DistanceFn>>,
    },
}

/// A Boolean function on `R^n` with whatever analytic metadata is known.
#[derive(Clone)]
pub struct Concept {
    dimension: usize,
    shape: Shape,
    negated: bool,
}

impl fmt::Debug for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Concept")
            .field("kind", &self.kind())
            .field("dimension", &self.dimension)
            .field("negated", &self.negated)
            .finish()
    }
}

impl Concept {
    pub fn halfspace(w: Vec<f64>, c: f64) -> Result<Self> {
        let h = Halfspace::new(w, c)?;
        Ok(Concept {
            dimension: h.w.len(),
            shape: Shape::Halfspace(h),
            negated: false,
        })
    }

    /// `sign(-x_1)` style halfspace through the origin with normal `e_axis`.
    pub fn axis_halfspace(dimension: usize, axis: usize, c: f64) -> Result<Self> {
        if axis >= dimension {
            return Err(Error::invalid(
                "axis",
                format!("{axis} >= dimension {dimension}"),
            ));
        }
        let mut w = vec![0.0; dimension];
        w[axis] = 1.0;
        Concept::halfspace(w, c)
    }

    /// `sign(p(x))`; `degree` must equal the actual degree of `p`.
    pub fn ptf(p: HermiteExpansion, degree: usize) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::invalid("ptf", "polynomial is identically zero"));
        }
        if p.degree_bound() != degree {
            return Err(Error::invalid(
                "degree",
                format!(
                    "declared {degree}, polynomial has degree {}",
                    p.degree_bound()
                ),
            ));
        }
        Ok(Concept {
            dimension: p.dimension(),
            shape: Shape::Ptf { p, degree },
            negated: false,
        })
    }

    pub fn ptf_from_monomials(
        dimension: usize,
        monomials: &[Monomial],
        degree: usize,
    ) -> Result<Self> {
        Concept::ptf(monomials_to_hermite(dimension, monomials)?, degree)
    }

    /// `+1` on the closed ball.
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("center", "must be non-empty"));
        }
        if !(radius > 0.0 && radius.is_finite()) || center.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "radius",
                format!("{radius} must be positive and finite"),
            ));
        }
        Ok(Concept {
            dimension: center.len(),
            shape: Shape::Ball { center, radius },
            negated: false,
        })
    }

    /// `+1` where every halfspace is `+1`.
    pub fn intersection(halfspaces: Vec<Halfspace>) -> Result<Self> {
        let Some(first) = halfspaces.first() else {
            return Err(Error::invalid("halfspaces", "need at least one"));
        };
        let dimension = first.w.len();
        if let Some(h) = halfspaces.iter().find(|h| h.w.len() != dimension) {
            return Err(Error::DimensionMismatch {
                expected: dimension,
                got: h.w.len(),
            });
        }
        if halfspaces.len() > MAX_INTERSECTION_FACETS {
            return Err(Error::invalid(
                "halfspaces",
                format!("at most {MAX_INTERSECTION_FACETS} supported"),
            ));
        }
        Ok(Concept {
            dimension,
            shape: Shape::Intersection(halfspaces),
            negated: false,
        })
    }

    pub fn constant(dimension: usize, value: i8) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("dimension", "must be positive"));
        }
        if value != 1 && value != -1 {
            return Err(Error::invalid("value", format!("{value} is not +1 or -1")));
        }
        Ok(Concept {
            dimension,
            shape: Shape::Constant(value),
            negated: false,
        })
    }

    /// A black-box concept. `eval` must return `+1` or `-1`.
    pub fn custom<E>(dimension: usize, eval: E) -> Result<Self>
    where
        E: Fn(&[f64]) -> i8 + Send + Sync + 'static,
    {
        if dimension == 0 {
            return Err(Error::invalid("dimension", "must be positive"));
        }
        Ok(Concept {
            dimension,
            shape: Shape::Custom {
                eval: Arc::new(eval),
                distance: None,
            },
            negated: false,
        })
    }

    /// Attaches a distance-to-`K(f)` oracle to a custom concept.
    pub fn with_distance<D>(mut self, distance: D) -> Result<Self>
    where
        D: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        match &mut self.shape {
            Shape::Custom { distance: slot, .. } if !self.negated => {
                *slot = Some(Arc::new(distance));
                Ok(self)
            }
            _ => Err(Error::invalid(
                "distance",
                "only un-negated custom concepts take an oracle",
            )),
        }
    }

    /// `-f`.
    pub fn negate(&self) -> Concept {
        let mut out = self.clone();
        if let Shape::Constant(v) = &mut out.shape {
            *v = -*v;
            return out;
        }
        out.negated = !out.negated;
        out
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn kind(&self) -> ConceptKind {
        match self.shape {
            Shape::Halfspace(_) => ConceptKind::Halfspace,
            Shape::Ptf { .. } => ConceptKind::Ptf,
            Shape::Ball { .. } => ConceptKind::Ball,
            Shape::Intersection(_) => ConceptKind::Intersection,
            Shape::Constant(_) => ConceptKind::Constant,
            Shape::Custom { .. } => ConceptKind::Custom,
        }
    }

    pub fn is_negated(&self) -> bool {
        self.negated
    }

    /// The halfspace parameters when this is a (possibly negated) halfspace.
    pub fn as_halfspace(&self) -> Option<&Halfspace> {
        match &self.shape {
            Shape::Halfspace(h) => Some(h),
            _ => None,
        }
    }

    /// The constant value when this concept is constant.
    pub fn as_constant(&self) -> Option<i8> {
        match self.shape {
            Shape::Constant(v) => Some(v),
            _ => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<i8> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    /// Caller guarantees `x.len() == self.dimension()`.
    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> i8 {
        let v = match &self.shape {
            Shape::Halfspace(h) => sign(h.margin(x)),
            Shape::Ptf { p, .. } => sign(p.eval(x).expect("dimension checked")),
            Shape::Ball { center, radius } => {
                let r2: f64 = center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
                sign(radius * radius - r2)
            }
            Shape::Intersection(hs) => {
                if hs.iter().all(|h| h.margin(x) >= 0.0) {
                    1
                } else {
                    -1
                }
            }
            Shape::Constant(v) => *v,
            Shape::Custom { eval, .. } => eval(x),
        };
        if self.negated {
            -v
        } else {
            v
        }
    }

    pub fn has_distance(&self) -> bool {
        match &self.shape {
            Shape::Ptf { .. } => false,
            Shape::Custom { distance, .. } => distance.is_some() && !self.negated,
            _ => true,
        }
    }

    /// Euclidean distance from `x` to `K(f)`, when an exact oracle exists.
    pub fn distance_to_set(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        self.distance_unchecked(x)
    }

    fn distance_unchecked(&self, x: &[f64]) -> Result<f64> {
        let missing = Error::MissingCapability("distance oracle");
        let neg = self.negated;
        Ok(match &self.shape {
            Shape::Halfspace(h) => {
                let m = h.margin(x);
                if neg {
                    m.max(0.0)
                } else {
                    (-m).max(0.0)
                }
            }
            Shape::Ball { center, radius } => {
                let r: f64 = center
                    .iter()
                    .zip(x)
                    .map(|(c, v)| (v - c) * (v - c))
                    .sum::<f64>()
                    .sqrt();
                if neg {
                    (radius - r).max(0.0)
                } else {
                    (r - radius).max(0.0)
                }
            }
            Shape::Intersection(hs) => {
                if neg {
                    hs.iter()
                        .map(|h| h.margin(x).max(0.0))
                        .fold(f64::INFINITY, f64::min)
                } else {
                    polyhedron_distance(hs, x)
                }
            }
            Shape::Constant(v) => {
                if *v == 1 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Shape::Custom {
                distance: Some(d), ..
            } if !neg => d(x),
            _ => return Err(missing),
        })
    }

    /// Closed-form Gaussian surface area, when known.
    pub fn gsa_closed_form(&self) -> Option<f64> {
        match &self.shape {
            Shape::Halfspace(h) => Some(normal_pdf(h.c)),
            Shape::Constant(_) => Some(0.0),
            Shape::Ball { center, radius } if center.iter().all(|&c| c == 0.0) => {
                Some(centered_ball_gsa(center.len(), *radius))
            }
            _ => None,
        }
    }

    /// Closed-form `GNS_delta(f)`, when known.
    pub fn gns_closed_form(&self, delta: f64) -> Option<f64> {
        match &self.shape {
            Shape::Halfspace(h) if h.c == 0.0 => gns_halfspace_closed_form(delta).ok(),
            Shape::Constant(_) => Some(0.0),
            _ => None,
        }
    }

    pub fn to_spec(&self) -> Option<ConceptSpec> {
        let negated = self.negated;
        Some(match &self.shape {
            Shape::Halfspace(h) => ConceptSpec::Halfspace {
                w: h.w.clone(),
                c: h.c,
                negated,
            },
            Shape::Ptf { p, degree } => ConceptSpec::Ptf {
                degree: *degree,
                polynomial: PolynomialSpec::Hermite(p.clone()),
                negated,
            },
            Shape::Ball { center, radius } => ConceptSpec::Ball {
                center: center.clone(),
                radius: *radius,
                negated,
            },
            Shape::Intersection(hs) => ConceptSpec::Intersection {
                halfspaces: hs.clone(),
                negated,
            },
            Shape::Constant(v) => ConceptSpec::Constant {
                dimension: self.dimension,
                value: *v,
            },
            Shape::Custom { .. } => return None,
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<ConceptSpec>(s)?.build()
    }
}

/// Polynomial payload of a PTF spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolynomialSpec {
    Hermite(HermiteExpansion),
    Monomials {
        dimension: usize,
        terms: Vec<Monomial>,
    },
}

/// JSON description of a concept, tagged by `"kind"`.
///
/// ```json
/// {"kind": "halfspace", "w": [1.0, 0.0], "c": 0.5}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConceptSpec {
    Halfspace {
        w: Vec<f64>,
        c: f64,
        #[serde(default, skip_serializing_if = "is_false")]
        negated: bool,
    },
    Ptf {
        degree: usize,
        polynomial: PolynomialSpec,
        #[serde(default, skip_serializing_if = "is_false")]
        negated: bool,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
        #[serde(default, skip_serializing_if = "is_false")]
        negated: bool,
    },
    Intersection {
        halfspaces: Vec<Halfspace>,
        #[serde(default, skip_serializing_if = "is_false")]
        negated: bool,
    },
    Constant {
        dimension: usize,
        value: i8,
    },
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl ConceptSpec {
    pub fn build(self) -> Result<Concept> {
        let (concept, negated) = match self {
            ConceptSpec::Halfspace { w, c, negated } => (Concept::halfspace(w, c)?, negated),
            ConceptSpec::Ptf {
                degree,
                polynomial,
                negated,
            } => {
                let p = match polynomial {
                    PolynomialSpec::Hermite(p) => p,
                    PolynomialSpec::Monomials { dimension, terms } => {
                        monomials_to_hermite(dimension, &terms)?
                    }
                };
                (Concept::ptf(p, degree)?, negated)
            }
            ConceptSpec::Ball {
                center,
                radius,
                negated,
            } => (Concept::ball(center, radius)?, negated),
            ConceptSpec::Intersection {
                halfspaces,
                negated,
            } => {
                let hs = halfspaces
                    .into_iter()
                    .map(|h| Halfspace::new(h.w, h.c))
                    .collect::<Result<Vec<_>>>()?;
                (Concept::intersection(hs)?, negated)
            }
            ConceptSpec::Constant { dimension, value } => {
                (Concept::constant(dimension, value)?, false)
            }
        };
        Ok(if negated { concept.negate() } else { concept })
    }
}

/// `r^(n-1) e^(-r^2/2) / (2^(n/2 - 1) Gamma(n/2))`: the Gaussian surface area
/// of the origin-centred ball of radius `r` in `R^n`.
pub fn centered_ball_gsa(n: usize, r: f64) -> f64 {
    let half = n as f64 / 2.0;
    let ln = (n as f64 - 1.0) * r.ln()
        - 0.5 * r * r
        - (half - 1.0) * std::f64::consts::LN_2
        - libm::lgamma(half);
    ln.exp()
}

/// `GNS_delta` of any halfspace through the origin: `arccos(1 - delta) / pi`.
pub fn gns_halfspace_closed_form(delta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid(
            "delta",
            format!("{delta} is outside [0, 1]"),
        ));
    }
    Ok((1.0 - delta).acos() / std::f64::consts::PI)
}

/// Exact Euclidean distance to `{y : <w_i, y> <= c_i for all i}` by
/// enumerating active sets and keeping the nearest feasible projection.
fn polyhedron_distance(hs: &[Halfspace], x: &[f64]) -> f64 {
    if hs.iter().all(|h| h.margin(x) >= 0.0) {
        return 0.0;
    }
    let n = x.len();
    let m = hs.len();
    let feasible = |y: &[f64]| hs.iter().all(|h| h.margin(y) >= -1e-10 * (1.0 + h.c.abs()));
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << m) {
        let active: Vec<&Halfspace> = (0..m)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| &hs[i])
            .collect();
        let k = active.len();
        if k > n {
            continue;
        }
        let mut gram = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                gram[i * k + j] = dot(&active[i].w, &active[j].w);
            }
        }
        let mut lambda: Vec<f64> = active.iter().map(|h| -h.margin(x)).collect();
        if linalg::solve(&mut gram, &mut lambda).is_err() {
            continue;
        }
        let mut y = x.to_vec();
        for (h, l) in active.iter().zip(&lambda) {
            for (yi, wi) in y.iter_mut().zip(&h.w) {
                *yi -= l * wi;
            }
        }
        if feasible(&y) {
            let d = y
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            best = best.min(d);
        }
    }
    // An empty polyhedron has no feasible candidate and stays at infinity.
    best
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid(
            "delta",
            format!("{delta} is outside [0, 1]"),
        ));
    }
    Ok(())
}

/// `P[f(X) != f(Y)]` for `(1 - delta)`-correlated standard Gaussians, with
/// `Y = (1 - delta) X + sqrt(1 - (1 - delta)^2) Z`.
pub fn gns_mc(c: &Concept, delta: f64, samples: u64, seed: u64) -> Result<EstimateWithError> {
    check_delta(delta)?;
    stats::require_samples(samples)?;
    let rho = NoiseLevel::new(1.0 - delta)?;
    disagreement_mc(c, rho, samples, seed)
}

fn disagreement_mc(
    c: &Concept,
    rho: NoiseLevel,
    samples: u64,
    seed: u64,
) -> Result<EstimateWithError> {
    let n = c.dimension();
    let r = rho.rho();
    let s = rho.complement();
    if s == 0.0 || c.as_constant().is_some() {
        return Ok(EstimateWithError {
            mean: 0.0,
            stderr: 0.0,
            samples,
            seed,
        });
    }
    let m = stats::monte_carlo_with(
        samples,
        seed,
        1,
        || (vec![0.0; n], vec![0.0; n]),
        |(x, y), rng, out| {
            fill_standard_normal(rng, x);
            fill_standard_normal(rng, y);
            let fx = c.eval_unchecked(x);
            for (yi, &xi) in y.iter_mut().zip(x.iter()) {
                *yi = r * xi + s * *yi;
            }
            out[0] = if fx != c.eval_unchecked(y) { 1.0 } else { 0.0 };
            Ok(())
        },
    )?;
    Ok(m[0].estimate(seed))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShellEstimate {
    pub delta: f64,
    pub estimate: EstimateWithError,
    pub hits: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GsaEstimate {
    /// Linear extrapolation to `delta -> 0` from the two smallest deltas.
    pub estimate: EstimateWithError,
    pub shells: Vec<ShellEstimate>,
    pub warning: Option<String>,
}

/// Estimates `vol(K_delta \ K) / delta` for each delta from one shared sample
/// and extrapolates linearly in `delta` using the two smallest values.
pub fn gsa_mc(c: &Concept, deltas: &[f64], samples: u64, seed: u64) -> Result<GsaEstimate> {
    stats::require_samples(samples)?;
    if deltas.is_empty() {
        return Err(Error::invalid("deltas", "need at least one"));
    }
    if deltas.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::invalid("deltas", "must be positive and finite"));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("deltas", "must be strictly decreasing"));
    }
    if !c.has_distance() {
        return Err(Error::MissingCapability("distance oracle"));
    }
    let n = c.dimension();
    let k = deltas.len();
    let (d1, d2) = if k >= 2 {
        (deltas[k - 1], deltas[k - 2])
    } else {
        (deltas[0], deltas[0])
    };
    // Columns: per-delta shell indicator / delta, per-delta hit, extrapolated value.
    let moments = stats::monte_carlo_with(
        samples,
        seed,
        2 * k + 1,
        || vec![0.0; n],
        |x, rng, out| {
            fill_standard_normal(rng, x);
            let dist = c.distance_unchecked(x)?;
            for (j, &d) in deltas.iter().enumerate() {
                let hit = dist > 0.0 && dist <= d;
                out[j] = if hit { 1.0 / d } else { 0.0 };
                out[k + j] = hit as u8 as f64;
            }
            out[2 * k] = if k >= 2 {
                (d2 * out[k - 1] - d1 * out[k - 2]) / (d2 - d1)
            } else {
                out[0]
            };
            Ok(())
        },
    )?;
    let shells: Vec<ShellEstimate> = deltas
        .iter()
        .enumerate()
        .map(|(j, &delta)| ShellEstimate {
            delta,
            estimate: moments[j].estimate(seed),
            hits: (moments[k + j].mean * moments[k + j].count as f64).round() as u64,
        })
        .collect();
    let low: Vec<String> = shells
        .iter()
        .filter(|s| s.hits < 100)
        .map(|s| format!("{} hits at delta {}", s.hits, s.delta))
        .collect();
    let warning = (!low.is_empty()).then(|| format!("low precision: {}", low.join(", ")));
    Ok(GsaEstimate {
        estimate: moments[2 * k].estimate(seed),
        shells,
        warning,
    })
}

/// Paired comparison of two independent Monte-Carlo estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairedCheck {
    pub lhs: EstimateWithError,
    pub rhs: EstimateWithError,
    pub combined_stderr: f64,
    pub z: f64,
    pub pass: bool,
}

impl PairedCheck {
    fn new(lhs: EstimateWithError, rhs: EstimateWithError) -> Self {
        let se = combined_stderr(lhs.stderr, rhs.stderr);
        let gap = lhs.mean - rhs.mean;
        let z = if gap == 0.0 { 0.0 } else { gap / se };
        PairedCheck {
            lhs,
            rhs,
            combined_stderr: se,
            z,
            pass: gap.abs() <= 4.0 * se,
        }
    }
}

/// `E|f(X) - f(rho X + sqrt(1 - rho^2) Y)|` against `2 GNS_{1 - rho}(f)`,
/// each side on its own seed derived from `seed`.
pub fn noise_distance_check(
    c: &Concept,
    rho: NoiseLevel,
    samples: u64,
    seed: u64,
) -> Result<PairedCheck> {
    stats::require_samples(samples)?;
    let lhs_seed = derive_seed(seed, 1);
    let disagreement = disagreement_mc(c, rho, samples, lhs_seed)?;
    // |f(X) - f(Y)| is 2 on disagreement and 0 otherwise.
    let lhs = EstimateWithError {
        mean: 2.0 * disagreement.mean,
        stderr: 2.0 * disagreement.stderr,
        samples,
        seed: lhs_seed,
    };
    let g = gns_mc(c, 1.0 - rho.rho(), samples, derive_seed(seed, 2))?;
    let rhs = EstimateWithError {
        mean: 2.0 * g.mean,
        stderr: 2.0 * g.stderr,
        ..g
    };
    Ok(PairedCheck::new(lhs, rhs))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GnsGsaRow {
    pub rho: f64,
    pub gns: EstimateWithError,
    /// `sqrt(pi) sqrt(1 - rho) GSA`.
    pub bound: f64,
    pub pass: bool,
}

/// Checks `GNS_{1 - rho}(f) <= sqrt(pi) sqrt(1 - rho) GSA(f)` for each `rho`.
/// `gsa` overrides the concept's closed form (for example with a `gsa_mc` value).
pub fn gns_gsa_bound_check(
    c: &Concept,
    rhos: &[f64],
    gsa: Option<f64>,
    samples: u64,
    seed: u64,
) -> Result<Vec<GnsGsaRow>> {
    let gsa = gsa
        .or_else(|| c.gsa_closed_form())
        .ok_or(Error::MissingCapability("surface area value"))?;
    rhos.iter()
        .enumerate()
        .map(|(i, &r)| {
            let rho = NoiseLevel::new(r)?;
            let gns = gns_mc(c, 1.0 - r, samples, derive_seed(seed, i as u64))?;
            let bound = std::f64::consts::PI.sqrt() * (1.0 - r).sqrt() * gsa;
            Ok(GnsGsaRow {
                rho: rho.rho(),
                pass: gns.mean <= bound + 4.0 * gns.stderr,
                gns,
                bound,
            })
        })
        .collect()
}
