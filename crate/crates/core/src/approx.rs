//! The approximating polynomial `p = Pi_d T_rho f` and the checks around it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::concepts::{Concept, ConceptKind};
use crate::error::{Error, Result};
use crate::hermite::{
    enumerate_multi_indices, gauss_hermite_rule, hermite_table_into, ExpansionEvaluator,
    HermiteExpansion, MultiIndex,
};
use crate::integrate::{integrate_pieces, DEFAULT_MAX_INTERVALS};
use crate::noise::{apply_to_expansion, NoiseLevel};
use crate::stats::{
    self, combined_stderr, fill_standard_normal, normal_cdf, normal_pdf, EstimateWithError,
};

/// Quadrature coefficient estimation is limited to this many dimensions.
pub const MAX_QUADRATURE_DIMENSION: usize = 3;

/// Absolute tolerance of the one-dimensional quadrature error path.
pub const QUADRATURE_ERROR_TOL: f64 = 1e-9;

const CUTOFF: f64 = 12.0;

/// Parameters `(epsilon, Gamma, rho, d)` of the construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproximationPlan {
    pub epsilon: Option<f64>,
    pub gamma: Option<f64>,
    pub rho: f64,
    pub degree: usize,
}

/// `rho = max(0, 1 - eps^2 / (16 pi Gamma^2))` (0 when `Gamma = 0`) and
/// `d = max(0, ceil(16 pi Gamma^2 ln(2/eps) / eps^2 - 1))`.
pub fn plan(epsilon: f64, gamma: f64) -> Result<ApproximationPlan> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(
            "epsilon",
            format!("{epsilon} must be positive and finite"),
        ));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(
            "gamma",
            format!("{gamma} must be non-negative and finite"),
        ));
    }
    let scale = 16.0 * PI * gamma * gamma;
    let rho = if gamma == 0.0 {
        0.0
    } else {
        (1.0 - epsilon * epsilon / scale).max(0.0)
    };
    let raw = (scale * (2.0 / epsilon).ln() / (epsilon * epsilon) - 1.0).ceil();
    let degree = if raw > 0.0 { raw as usize } else { 0 };
    Ok(ApproximationPlan {
        epsilon: Some(epsilon),
        gamma: Some(gamma),
        rho,
        degree,
    })
}

impl ApproximationPlan {
    /// A plan with hand-picked `rho` and `d`.
    pub fn explicit(rho: f64, degree: usize) -> Result<Self> {
        NoiseLevel::new(rho)?;
        Ok(ApproximationPlan {
            epsilon: None,
            gamma: None,
            rho,
            degree,
        })
    }

    pub fn noise_level(&self) -> NoiseLevel {
        NoiseLevel::new(self.rho).expect("plans hold a validated rho")
    }

    /// `rho^(d+1)`.
    pub fn tail_term(&self) -> f64 {
        self.rho.powi(self.degree as i32 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CoefficientMethod {
    /// Closed forms (halfspaces and constants).
    Exact,
    /// Tensor Gauss–Hermite rule; dimension at most 3.
    Quadrature { points_per_axis: usize },
    /// One shared Gaussian sample for every coefficient.
    MonteCarlo { samples: u64, seed: u64 },
}

impl CoefficientMethod {
    /// Exact when available, else 200-point quadrature for dimension <= 3.
    pub fn default_for(c: &Concept) -> Option<Self> {
        if supports_exact(c) {
            Some(CoefficientMethod::Exact)
        } else if c.dimension() <= MAX_QUADRATURE_DIMENSION {
            Some(CoefficientMethod::Quadrature {
                points_per_axis: 200,
            })
        } else {
            None
        }
    }
}

/// Estimated Hermite coefficients `f_hat(alpha)` for all `|alpha| <= degree`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coefficients {
    pub expansion: HermiteExpansion,
    /// Every `|alpha| <= degree` was computed, even where the stored value is zero.
    pub degree: usize,
    pub method: CoefficientMethod,
    /// Per-coefficient standard errors (Monte-Carlo only).
    pub stderr: Option<Vec<(MultiIndex, f64)>>,
}

fn supports_exact(c: &Concept) -> bool {
    matches!(c.kind(), ConceptKind::Halfspace | ConceptKind::Constant)
}

/// Hermite coefficients of `t -> sign(c - t)`: `2 Phi(c) - 1` at `k = 0` and
/// `-2 H_{k-1}(c) phi(c) / sqrt(k)` for `k >= 1`.
pub fn halfspace_profile_coefficients(c: f64, degree: usize) -> Vec<f64> {
    let mut h = Vec::new();
    hermite_table_into(degree.max(1), c, &mut h);
    let pdf = normal_pdf(c);
    (0..=degree)
        .map(|k| {
            if k == 0 {
                2.0 * normal_cdf(c) - 1.0
            } else {
                -2.0 * h[k - 1] * pdf / (k as f64).sqrt()
            }
        })
        .collect()
}

fn exact_coefficients(c: &Concept, degree: usize) -> Result<HermiteExpansion> {
    let n = c.dimension();
    if let Some(v) = c.as_constant() {
        return HermiteExpansion::from_terms(n, [(MultiIndex::zero(n), v as f64)]);
    }
    let h = c
        .as_halfspace()
        .ok_or(Error::MissingCapability("closed-form coefficients"))?;
    let profile = halfspace_profile_coefficients(h.c(), degree);
    let flip = if c.is_negated() { -1.0 } else { 1.0 };
    // f(x) = g(<w, x>) has f_hat(alpha) = g_hat(|alpha|) sqrt(|alpha|! / alpha!) w^alpha.
    let ln_fact = |k: usize| (2..=k).map(|j| (j as f64).ln()).sum::<f64>();
    let mut p = HermiteExpansion::new(n)?;
    for alpha in enumerate_multi_indices(n, degree) {
        let k = alpha.degree();
        let mut w_pow = 1.0;
        for (&e, &wi) in alpha.exponents().iter().zip(h.w()) {
            w_pow *= wi.powi(e as i32);
        }
        if w_pow == 0.0 || profile[k] == 0.0 {
            continue;
        }
        let multinomial = (0.5 * (ln_fact(k) - alpha.ln_factorial())).exp();
        p.set(alpha, flip * profile[k] * multinomial * w_pow)?;
    }
    Ok(p)
}

fn quadrature_coefficients(
    c: &Concept,
    degree: usize,
    points_per_axis: usize,
) -> Result<HermiteExpansion> {
    let n = c.dimension();
    if n > MAX_QUADRATURE_DIMENSION {
        return Err(Error::invalid(
            "method",
            format!("quadrature supports dimension <= {MAX_QUADRATURE_DIMENSION}, got {n}"),
        ));
    }
    let rule = gauss_hermite_rule(points_per_axis, n)?;
    let alphas = enumerate_multi_indices(n, degree);
    let mut sums = vec![0.0; alphas.len()];
    let mut tables: Vec<Vec<f64>> = vec![Vec::new(); n];
    for (x, w) in rule.iter() {
        let fx = c.eval_unchecked(x) as f64 * w;
        for (t, &xi) in tables.iter_mut().zip(x) {
            hermite_table_into(degree, xi, t);
        }
        for (s, alpha) in sums.iter_mut().zip(&alphas) {
            let h: f64 = alpha
                .exponents()
                .iter()
                .zip(&tables)
                .map(|(&e, t)| t[e as usize])
                .product();
            *s += fx * h;
        }
    }
    HermiteExpansion::from_terms(n, alphas.into_iter().zip(sums))
}

fn monte_carlo_coefficients(
    c: &Concept,
    degree: usize,
    samples: u64,
    seed: u64,
) -> Result<(HermiteExpansion, Vec<(MultiIndex, f64)>)> {
    stats::require_samples(samples)?;
    let n = c.dimension();
    let alphas = enumerate_multi_indices(n, degree);
    let moments = stats::monte_carlo_with(
        samples,
        seed,
        alphas.len(),
        || (vec![0.0; n], vec![Vec::<f64>::new(); n]),
        |(x, tables), rng, out| {
            fill_standard_normal(rng, x);
            let fx = c.eval_unchecked(x) as f64;
            for (t, &xi) in tables.iter_mut().zip(x.iter()) {
                hermite_table_into(degree, xi, t);
            }
            for (o, alpha) in out.iter_mut().zip(&alphas) {
                let h: f64 = alpha
                    .exponents()
                    .iter()
                    .zip(tables.iter())
                    .map(|(&e, t)| t[e as usize])
                    .product();
                *o = fx * h;
            }
            Ok(())
        },
    )?;
    let stderr = alphas
        .iter()
        .cloned()
        .zip(moments.iter().map(|m| m.stderr()))
        .collect();
    let p =
        HermiteExpansion::from_terms(n, alphas.into_iter().zip(moments.iter().map(|m| m.mean)))?;
    Ok((p, stderr))
}

/// Hermite coefficients of `c` for every `|alpha| <= degree`.
pub fn estimate_coefficients(
    c: &Concept,
    degree: usize,
    method: CoefficientMethod,
) -> Result<Coefficients> {
    let (expansion, stderr) = match method {
        CoefficientMethod::Exact => (exact_coefficients(c, degree)?, None),
        CoefficientMethod::Quadrature { points_per_axis } => {
            (quadrature_coefficients(c, degree, points_per_axis)?, None)
        }
        CoefficientMethod::MonteCarlo { samples, seed } => {
            let (p, se) = monte_carlo_coefficients(c, degree, samples, seed)?;
            (p, Some(se))
        }
    };
    Ok(Coefficients {
        expansion,
        degree,
        method,
        stderr,
    })
}

/// `Pi_d T_rho f_hat`; `f_hat.degree_bound()` must reach `plan.degree`.
pub fn build(fhat: &HermiteExpansion, plan: &ApproximationPlan) -> Result<HermiteExpansion> {
    if fhat.degree_bound() < plan.degree {
        return Err(Error::invalid(
            "fhat",
            format!(
                "degree {} is below the plan degree {}",
                fhat.degree_bound(),
                plan.degree
            ),
        ));
    }
    Ok(apply_to_expansion(fhat, plan.noise_level()).truncate(plan.degree))
}

/// Like [`build`], trusting the resolved degree recorded in `coeffs` (whose
/// high-order coefficients may be exactly zero and hence absent).
pub fn build_from(coeffs: &Coefficients, plan: &ApproximationPlan) -> Result<HermiteExpansion> {
    if coeffs.degree < plan.degree {
        return Err(Error::invalid(
            "coefficients",
            format!(
                "resolved to degree {}, plan needs {}",
                coeffs.degree, plan.degree
            ),
        ));
    }
    Ok(apply_to_expansion(&coeffs.expansion, plan.noise_level()).truncate(plan.degree))
}

/// Monte-Carlo `E|f - p|` and `E(f - p)^2` from one shared sample.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ErrorEstimates {
    pub l1: EstimateWithError,
    /// `sqrt(E(f - p)^2)` with a delta-method standard error.
    pub l2: EstimateWithError,
}

pub fn error_mc(
    c: &Concept,
    p: &HermiteExpansion,
    samples: u64,
    seed: u64,
) -> Result<ErrorEstimates> {
    stats::require_samples(samples)?;
    check_dimensions(c, p)?;
    let n = c.dimension();
    let m = stats::monte_carlo_with(
        samples,
        seed,
        2,
        || (vec![0.0; n], ExpansionEvaluator::new(p)),
        |(x, ev), rng, out| {
            fill_standard_normal(rng, x);
            let gap = c.eval_unchecked(x) as f64 - ev.eval(x);
            out[0] = gap.abs();
            out[1] = gap * gap;
            Ok(())
        },
    )?;
    let l1 = m[0].estimate(seed);
    let sq = m[1].estimate(seed);
    let root = sq.mean.sqrt();
    let l2 = EstimateWithError {
        mean: root,
        stderr: if root > 0.0 {
            sq.stderr / (2.0 * root)
        } else {
            0.0
        },
        ..sq
    };
    Ok(ErrorEstimates { l1, l2 })
}

/// Monte-Carlo `E|f(X) - p(X)|`.
pub fn l1_error(
    c: &Concept,
    p: &HermiteExpansion,
    samples: u64,
    seed: u64,
) -> Result<EstimateWithError> {
    Ok(error_mc(c, p, samples, seed)?.l1)
}

fn check_dimensions(c: &Concept, p: &HermiteExpansion) -> Result<()> {
    if c.dimension() != p.dimension() {
        return Err(Error::DimensionMismatch {
            expected: c.dimension(),
            got: p.dimension(),
        });
    }
    Ok(())
}

/// Jump locations of a one-dimensional concept, when known.
fn jumps_1d(c: &Concept) -> Option<Vec<f64>> {
    if c.dimension() != 1 {
        return None;
    }
    if c.as_constant().is_some() {
        return Some(Vec::new());
    }
    if let Some(h) = c.as_halfspace() {
        return Some(vec![h.c() * h.w()[0]]);
    }
    let spec = c.to_spec()?;
    match spec {
        crate::concepts::ConceptSpec::Ball { center, radius, .. } => {
            Some(vec![center[0] - radius, center[0] + radius])
        }
        crate::concepts::ConceptSpec::Intersection { halfspaces, .. } => {
            Some(halfspaces.iter().map(|h| h.c() * h.w()[0]).collect())
        }
        _ => None,
    }
}

/// `E|f - p|` and `sqrt(E(f - p)^2)` for a one-dimensional concept with known
/// jumps, by adaptive quadrature on `[-12, 12]` split at every jump.
pub fn error_quadrature_1d(c: &Concept, p: &HermiteExpansion) -> Result<(f64, f64)> {
    check_dimensions(c, p)?;
    let jumps = jumps_1d(c).ok_or(Error::MissingCapability("one-dimensional jump locations"))?;
    let d = p.degree_bound().max(1) as f64;
    let step = std::f64::consts::FRAC_PI_2 / d.sqrt();
    let mut breaks: Vec<f64> = jumps.into_iter().filter(|x| x.abs() < CUTOFF).collect();
    let pieces = (2.0 * CUTOFF / step).ceil() as usize;
    breaks.extend((0..=pieces).map(|i| -CUTOFF + 2.0 * CUTOFF * i as f64 / pieces as f64));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let coeffs: Vec<f64> = (0..=p.degree_bound())
        .map(|k| p.coeff(&MultiIndex::univariate(k as u32)))
        .collect();
    let poly = |x: f64| -> f64 {
        let mut prev = 1.0;
        let mut cur = x;
        let mut sum = coeffs[0];
        if coeffs.len() > 1 {
            sum += coeffs[1] * x;
        }
        for j in 1..coeffs.len().saturating_sub(1) {
            let next = (x * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
            prev = cur;
            cur = next;
            sum += coeffs[j + 1] * cur;
        }
        sum
    };
    let f = |x: f64| c.eval_unchecked(&[x]) as f64;
    let l1 = integrate_pieces(
        |x| (f(x) - poly(x)).abs() * normal_pdf(x),
        &breaks,
        QUADRATURE_ERROR_TOL,
        DEFAULT_MAX_INTERVALS,
    )?
    .value;
    let l2sq = integrate_pieces(
        |x| (f(x) - poly(x)).powi(2) * normal_pdf(x),
        &breaks,
        QUADRATURE_ERROR_TOL,
        DEFAULT_MAX_INTERVALS,
    )?
    .value;
    Ok((l1, l2sq.max(0.0).sqrt()))
}

/// How `bound_check` measures the error of the built polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ErrorMethod {
    /// One-dimensional adaptive quadrature (deterministic).
    Quadrature,
    MonteCarlo {
        samples: u64,
        seed: u64,
    },
}

impl ErrorMethod {
    /// Quadrature for one-dimensional concepts with known jumps, else Monte Carlo.
    pub fn default_for(c: &Concept, samples: u64, seed: u64) -> Self {
        if jumps_1d(c).is_some() {
            ErrorMethod::Quadrature
        } else {
            ErrorMethod::MonteCarlo { samples, seed }
        }
    }
}

/// Outcome of comparing the measured error with `2 GNS_{1-rho}(f) + rho^(d+1)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxReport {
    pub plan: ApproximationPlan,
    pub coefficient_method: CoefficientMethod,
    pub error_method: ErrorMethod,
    pub measured_l1_error: EstimateWithError,
    pub measured_l2_error: EstimateWithError,
    /// `GNS_{1-rho}(f)` (zero stderr when closed form).
    pub gns: EstimateWithError,
    /// `2 GNS_{1-rho}(f)`.
    pub gns_term: f64,
    /// `rho^(d+1)`.
    pub tail_term: f64,
    /// `gns_term + tail_term`.
    pub bound: f64,
    /// `4 x` the combined standard error of the error and GNS estimates.
    pub statistical_slack: f64,
    /// `sum_alpha rho^|alpha| stderr(c_alpha) max_grid |H_alpha|` for Monte-Carlo coefficients.
    pub coefficient_slack: f64,
    /// `measured_l1_error <= bound + statistical_slack + coefficient_slack`.
    pub pass: bool,
    /// `L1 <= L2 + 4 x combined stderr`.
    pub l1_le_l2: bool,
    pub built: HermiteExpansion,
}

/// `max_{|x| <= 3} |H_k(x)|` over a 61-point grid, for `k <= kmax`.
fn grid_sup(kmax: usize) -> Vec<f64> {
    let mut sup = vec![0.0f64; kmax + 1];
    let mut t = Vec::new();
    for i in 0..=60 {
        let x = -3.0 + 0.1 * i as f64;
        hermite_table_into(kmax, x, &mut t);
        for (s, v) in sup.iter_mut().zip(&t) {
            *s = s.max(v.abs());
        }
    }
    sup
}

fn coefficient_slack(coeffs: &Coefficients, plan: &ApproximationPlan) -> f64 {
    let Some(se) = &coeffs.stderr else { return 0.0 };
    let sup = grid_sup(plan.degree);
    se.iter()
        .filter(|(a, _)| a.degree() <= plan.degree)
        .map(|(a, s)| {
            let h: f64 = a.exponents().iter().map(|&e| sup[e as usize]).product();
            plan.rho.powi(a.degree() as i32) * s * h
        })
        .sum()
}

/// Builds `p = Pi_d T_rho f` and checks `E|f - p| <= 2 GNS_{1-rho}(f) + rho^(d+1)`.
///
/// `gns` supplies `GNS_{1-rho}(f)`; pass `None` to use the concept's closed form.
pub fn bound_check(
    c: &Concept,
    plan: &ApproximationPlan,
    coefficient_method: CoefficientMethod,
    error_method: ErrorMethod,
    gns: Option<EstimateWithError>,
) -> Result<ApproxReport> {
    let gns = match gns {
        Some(g) => g,
        None => EstimateWithError::exact(
            c.gns_closed_form(1.0 - plan.rho)
                .ok_or(Error::MissingCapability("closed-form noise sensitivity"))?,
        ),
    };
    let coeffs = estimate_coefficients(c, plan.degree, coefficient_method)?;
    let built = build_from(&coeffs, plan)?;
    let (l1, l2) = match error_method {
        ErrorMethod::Quadrature => {
            let (a, b) = error_quadrature_1d(c, &built)?;
            (EstimateWithError::exact(a), EstimateWithError::exact(b))
        }
        ErrorMethod::MonteCarlo { samples, seed } => {
            let e = error_mc(c, &built, samples, seed)?;
            (e.l1, e.l2)
        }
    };
    let gns_term = 2.0 * gns.mean;
    let tail_term = plan.tail_term();
    let bound = gns_term + tail_term;
    let statistical_slack = 4.0 * combined_stderr(l1.stderr, 2.0 * gns.stderr);
    let coefficient_slack = coefficient_slack(&coeffs, plan);
    Ok(ApproxReport {
        plan: *plan,
        coefficient_method,
        error_method,
        measured_l1_error: l1,
        measured_l2_error: l2,
        gns,
        gns_term,
        tail_term,
        bound,
        statistical_slack,
        coefficient_slack,
        pass: l1.mean <= bound + statistical_slack + coefficient_slack,
        l1_le_l2: l1.mean <= l2.mean + 4.0 * combined_stderr(l1.stderr, l2.stderr) + 1e-12,
        built,
    })
}
