//! L1 polynomial regression in the Hermite basis followed by thresholding.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::{plan, ApproximationPlan};
use crate::concepts::{sign, Concept};
use crate::error::{Error, Result};
use crate::hermite::{
    enumerate_multi_indices, hermite_table_into, ExpansionEvaluator, HermiteExpansion, MultiIndex,
};
use crate::linalg;
use crate::stats::{
    self, chunk_rng, derive_seed, fill_standard_normal, EstimateWithError, CHUNK_SIZE,
};

pub const DEFAULT_DEGREE_CAP: usize = 30;

/// IRLS weights are `1 / max(|r|, HUBER_DELTA)`.
pub const HUBER_DELTA: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: i8,
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..0.5).contains(&eta) {
        return Err(Error::invalid("eta", format!("{eta} is outside [0, 1/2)")));
    }
    Ok(())
}

/// `m` draws `X ~ N(0, I_n)` labelled `f(X)`, each label flipped with probability `eta`.
pub fn generate_agnostic_data(
    c: &Concept,
    eta: f64,
    m: usize,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    check_eta(eta)?;
    let n = c.dimension();
    let chunks = (m as u64).div_ceil(CHUNK_SIZE);
    let parts: Vec<Vec<LabeledSample>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = chunk_rng(seed, chunk);
            let len = CHUNK_SIZE.min(m as u64 - chunk * CHUNK_SIZE) as usize;
            (0..len)
                .map(|_| {
                    let mut x = vec![0.0; n];
                    fill_standard_normal(&mut rng, &mut x);
                    let clean = c.eval_unchecked(&x);
                    let flip = rng.random::<f64>() < eta;
                    LabeledSample {
                        y: if flip { -clean } else { clean },
                        x,
                    }
                })
                .collect()
        })
        .collect();
    Ok(parts.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iters: usize,
    /// Convergence when the best loss improves by less than this over 5 iterations.
    pub tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iters: 500,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct L1Fit {
    pub expansion: HermiteExpansion,
    /// `(1/m) sum_i |y_i - p(x_i)|`.
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Rows `[H_alpha(x_i)]_alpha`, row-major.
fn design_matrix(samples: &[LabeledSample], alphas: &[MultiIndex], degree: usize) -> Vec<f64> {
    let n = alphas.first().map_or(0, MultiIndex::dimension);
    let b = alphas.len();
    let mut out = vec![0.0; samples.len() * b];
    out.par_chunks_mut(b).zip(samples).for_each_init(
        || vec![Vec::new(); n],
        |tables, (row, s)| {
            for (t, &xi) in tables.iter_mut().zip(&s.x) {
                hermite_table_into(degree, xi, t);
            }
            for (v, alpha) in row.iter_mut().zip(alphas) {
                *v = alpha
                    .exponents()
                    .iter()
                    .zip(tables.iter())
                    .map(|(&e, t)| t[e as usize])
                    .product();
            }
        },
    );
    out
}

fn l1_loss(a: &[f64], y: &[f64], c: &[f64]) -> f64 {
    let b = c.len();
    let total: f64 = a
        .chunks(b)
        .zip(y)
        .map(|(row, &yi)| (yi - row.iter().zip(c).map(|(u, v)| u * v).sum::<f64>()).abs())
        .sum();
    total / y.len() as f64
}

/// Solves `(A^T W A) c = A^T W y`, with a small ridge if the system is singular.
fn weighted_least_squares(a: &[f64], y: &[f64], w: &[f64], b: usize) -> Result<Vec<f64>> {
    let mut gram = vec![0.0; b * b];
    let mut rhs = vec![0.0; b];
    for ((row, &yi), &wi) in a.chunks(b).zip(y).zip(w) {
        for i in 0..b {
            let wr = wi * row[i];
            rhs[i] += wr * yi;
            for j in 0..=i {
                gram[i * b + j] += wr * row[j];
            }
        }
    }
    let trace: f64 = (0..b).map(|i| gram[i * b + i]).sum();
    for ridge in [0.0, 1e-12, 1e-9, 1e-6] {
        let mut g = gram.clone();
        let mut r = rhs.clone();
        for i in 0..b {
            g[i * b + i] += ridge * trace / b as f64;
        }
        if linalg::cholesky_solve(&mut g, &mut r).is_ok() && r.iter().all(|v| v.is_finite()) {
            return Ok(r);
        }
    }
    Err(Error::Singular)
}

/// Interpolates the `b` rows with the smallest residuals (a vertex of the LP).
fn vertex_snap(a: &[f64], y: &[f64], c: &[f64]) -> Option<Vec<f64>> {
    let b = c.len();
    let mut order: Vec<usize> = (0..y.len()).collect();
    let resid: Vec<f64> = a
        .chunks(b)
        .zip(y)
        .map(|(row, &yi)| (yi - row.iter().zip(c).map(|(u, v)| u * v).sum::<f64>()).abs())
        .collect();
    order.sort_by(|&i, &j| resid[i].total_cmp(&resid[j]).then(i.cmp(&j)));
    // Greedy selection of linearly independent rows by Gram–Schmidt.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(b);
    let mut chosen = Vec::with_capacity(b);
    for &i in &order {
        if chosen.len() == b {
            break;
        }
        let row = &a[i * b..(i + 1) * b];
        let mut v = row.to_vec();
        for q in &basis {
            let d: f64 = v.iter().zip(q).map(|(s, t)| s * t).sum();
            v.iter_mut().zip(q).for_each(|(s, t)| *s -= d * t);
        }
        let norm = v.iter().map(|s| s * s).sum::<f64>().sqrt();
        let scale = row.iter().map(|s| s * s).sum::<f64>().sqrt();
        if norm > 1e-8 * scale.max(1e-300) {
            v.iter_mut().for_each(|s| *s /= norm);
            basis.push(v);
            chosen.push(i);
        }
    }
    if chosen.len() < b {
        return None;
    }
    let mut m = Vec::with_capacity(b * b);
    let mut rhs = Vec::with_capacity(b);
    for &i in &chosen {
        m.extend_from_slice(&a[i * b..(i + 1) * b]);
        rhs.push(y[i]);
    }
    linalg::solve(&mut m, &mut rhs).ok()?;
    rhs.iter().all(|v| v.is_finite()).then_some(rhs)
}

/// Closest point to 0 of the median interval of `y`.
fn median_toward_zero(y: &[f64]) -> f64 {
    let mut s = y.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len();
    let (lo, hi) = if m % 2 == 1 {
        (s[m / 2], s[m / 2])
    } else {
        (s[m / 2 - 1], s[m / 2])
    };
    0.0f64.clamp(lo, hi)
}

/// Minimizes `(1/m) sum_i |y_i - sum_alpha c_alpha H_alpha(x_i)|` over `|alpha| <= d`.
///
/// Smoothed IRLS followed by a vertex-snap polish. A run that hits
/// `max_iters` returns its best iterate with `converged = false`.
pub fn fit_l1(samples: &[LabeledSample], d: usize, config: FitConfig) -> Result<L1Fit> {
    let first = samples
        .first()
        .ok_or(Error::invalid("samples", "must be non-empty"))?;
    let n = first.x.len();
    if n == 0 {
        return Err(Error::invalid(
            "samples",
            "points must have positive dimension",
        ));
    }
    if let Some(s) = samples.iter().find(|s| s.x.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: s.x.len(),
        });
    }
    let alphas = enumerate_multi_indices(n, d);
    let b = alphas.len();
    if samples.len() < b {
        return Err(Error::invalid(
            "samples",
            format!("{} samples for {b} basis functions", samples.len()),
        ));
    }
    let y: Vec<f64> = samples.iter().map(|s| s.y as f64).collect();
    if d == 0 {
        let c = median_toward_zero(&y);
        let loss = y.iter().map(|v| (v - c).abs()).sum::<f64>() / y.len() as f64;
        return Ok(L1Fit {
            expansion: HermiteExpansion::from_terms(n, [(MultiIndex::zero(n), c)])?,
            loss,
            iterations: 0,
            converged: true,
        });
    }
    let a = design_matrix(samples, &alphas, d);
    let mut w = vec![1.0; y.len()];
    let mut best = weighted_least_squares(&a, &y, &w, b)?;
    let mut best_loss = l1_loss(&a, &y, &best);
    let mut history = vec![best_loss];
    let mut current = best.clone();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters {
        iterations += 1;
        for ((wi, row), &yi) in w.iter_mut().zip(a.chunks(b)).zip(&y) {
            let r = yi - row.iter().zip(&current).map(|(u, v)| u * v).sum::<f64>();
            *wi = 1.0 / r.abs().max(HUBER_DELTA);
        }
        current = weighted_least_squares(&a, &y, &w, b)?;
        let loss = l1_loss(&a, &y, &current);
        if loss < best_loss {
            best_loss = loss;
            best.clone_from(&current);
        }
        history.push(best_loss);
        if history.len() > 5 && history[history.len() - 6] - best_loss < config.tol {
            converged = true;
            break;
        }
    }
    if let Some(v) = vertex_snap(&a, &y, &best) {
        let loss = l1_loss(&a, &y, &v);
        if loss < best_loss {
            best_loss = loss;
            best = v;
        }
    }
    Ok(L1Fit {
        expansion: HermiteExpansion::from_terms(n, alphas.into_iter().zip(best))?,
        loss: best_loss,
        iterations,
        converged,
    })
}

/// `x -> sign(p(x) - t)` with `sign(0) = +1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub p: HermiteExpansion,
    pub threshold: f64,
}

impl Hypothesis {
    pub fn predict(&self, x: &[f64]) -> Result<i8> {
        Ok(sign(self.p.eval(x)? - self.threshold))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    /// Empirical 0-1 error at `threshold`.
    pub error: f64,
}

/// Empirical 0-1 error of `sign(s - t)` for every `t` in `candidates`.
pub fn threshold_errors(scores: &[f64], labels: &[i8], candidates: &[f64]) -> Vec<f64> {
    let mut pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y > 0)
        .map(|(s, _)| *s)
        .collect();
    let mut neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y < 0)
        .map(|(s, _)| *s)
        .collect();
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let m = scores.len() as f64;
    candidates
        .iter()
        .map(|&t| {
            // Positives with s < t are wrong; negatives with s >= t are wrong.
            let pos_wrong = pos.partition_point(|&s| s < t);
            let neg_wrong = neg.len() - neg.partition_point(|&s| s < t);
            (pos_wrong + neg_wrong) as f64 / m
        })
        .collect()
}

/// Picks `t` minimizing the empirical error of `sign(p(x) - t)` over the
/// scores, the midpoints between consecutive distinct scores, and 0.
/// Ties go to the smallest `|t|`, then the smallest `t`.
pub fn choose_threshold(
    p: &HermiteExpansion,
    samples: &[LabeledSample],
) -> Result<ThresholdChoice> {
    if samples.is_empty() {
        return Err(Error::invalid("samples", "must be non-empty"));
    }
    let mut ev = ExpansionEvaluator::new(p);
    let mut scores = Vec::with_capacity(samples.len());
    for s in samples {
        if s.x.len() != p.dimension() {
            return Err(Error::DimensionMismatch {
                expected: p.dimension(),
                got: s.x.len(),
            });
        }
        scores.push(ev.eval(&s.x));
    }
    let labels: Vec<i8> = samples.iter().map(|s| s.y).collect();
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut candidates = sorted.clone();
    candidates.extend(sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(0.0);
    let errors = threshold_errors(&scores, &labels, &candidates);
    let (threshold, error) = candidates
        .iter()
        .zip(&errors)
        .map(|(&t, &e)| (t, e))
        .min_by(|a, b| {
            a.1.total_cmp(&b.1)
                .then(a.0.abs().total_cmp(&b.0.abs()))
                .then(a.0.total_cmp(&b.0))
        })
        .expect("candidates are non-empty");
    Ok(ThresholdChoice { threshold, error })
}

/// Misclassification rate of `h` on fresh data from `c` with label noise `eta`.
pub fn evaluate(
    h: &Hypothesis,
    c: &Concept,
    eta: f64,
    m_test: u64,
    seed: u64,
) -> Result<EstimateWithError> {
    check_eta(eta)?;
    stats::require_samples(m_test)?;
    if h.p.dimension() != c.dimension() {
        return Err(Error::DimensionMismatch {
            expected: c.dimension(),
            got: h.p.dimension(),
        });
    }
    let n = c.dimension();
    let m = stats::monte_carlo_with(
        m_test,
        seed,
        1,
        || (vec![0.0; n], ExpansionEvaluator::new(&h.p)),
        |(x, ev), rng, out| {
            fill_standard_normal(rng, x);
            let clean = c.eval_unchecked(x);
            let y = if rng.random::<f64>() < eta {
                -clean
            } else {
                clean
            };
            let guess = sign(ev.eval(x) - h.threshold);
            out[0] = if guess != y { 1.0 } else { 0.0 };
            Ok(())
        },
    )?;
    Ok(m[0].estimate(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub epsilon: f64,
    pub gamma: f64,
    pub eta: f64,
    pub m_train: usize,
    pub m_test: u64,
    pub seed: u64,
    pub degree_cap: usize,
    pub fit: FitConfig,
}

impl LearnConfig {
    pub fn new(epsilon: f64, gamma: f64, eta: f64, m_train: usize, m_test: u64, seed: u64) -> Self {
        LearnConfig {
            epsilon,
            gamma,
            eta,
            m_train,
            m_test,
            seed,
            degree_cap: DEFAULT_DEGREE_CAP,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnResult {
    pub plan: ApproximationPlan,
    /// Degree actually fitted: `min(plan.degree, degree_cap)`.
    pub degree: usize,
    pub basis_size: usize,
    pub warning: Option<String>,
    pub hypothesis: Hypothesis,
    pub train_l1_loss: f64,
    pub train_error: f64,
    pub fit_iterations: usize,
    pub fit_converged: bool,
    pub test_error: EstimateWithError,
    /// The label-noise rate, an upper bound on `opt`.
    pub opt_upper_bound: f64,
    /// `test_error.mean - opt_upper_bound`.
    pub excess: f64,
}

/// Generate, fit, threshold, evaluate. Training data uses `derive_seed(seed, 1)`
/// and test data `derive_seed(seed, 2)`.
pub fn learn(c: &Concept, config: &LearnConfig) -> Result<LearnResult> {
    check_eta(config.eta)?;
    let plan = plan(config.epsilon, config.gamma)?;
    let degree = plan.degree.min(config.degree_cap);
    let warning = (plan.degree > config.degree_cap).then(|| {
        format!(
            "planned degree {} exceeds cap {}; fitting at degree {}",
            plan.degree, config.degree_cap, degree
        )
    });
    let train = generate_agnostic_data(c, config.eta, config.m_train, derive_seed(config.seed, 1))?;
    let fit = fit_l1(&train, degree, config.fit)?;
    let choice = choose_threshold(&fit.expansion, &train)?;
    let basis_size = enumerate_multi_indices(c.dimension(), degree).len();
    let hypothesis = Hypothesis {
        p: fit.expansion,
        threshold: choice.threshold,
    };
    let test_error = evaluate(
        &hypothesis,
        c,
        config.eta,
        config.m_test,
        derive_seed(config.seed, 2),
    )?;
    Ok(LearnResult {
        plan,
        degree,
        basis_size,
        warning,
        hypothesis,
        train_l1_loss: fit.loss,
        train_error: choice.error,
        fit_iterations: fit.iterations,
        fit_converged: fit.converged,
        excess: test_error.mean - config.eta,
        opt_upper_bound: config.eta,
        test_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn halfspace() -> Concept {
        Concept::axis_halfspace(1, 0, 0.0).unwrap()
    }

    fn pts(xs: &[(f64, i8)]) -> Vec<LabeledSample> {
        xs.iter()
            .map(|&(x, y)| LabeledSample { x: vec![x], y })
            .collect()
    }

    #[test]
    fn data_generation() {
        let c = halfspace();
        let clean = generate_agnostic_data(&c, 0.0, 5000, 3).unwrap();
        assert!(clean.iter().all(|s| s.y == c.eval(&s.x).unwrap()));
        let m = 100_000;
        let noisy = generate_agnostic_data(&c, 0.1, m, 3).unwrap();
        let flips = noisy
            .iter()
            .filter(|s| s.y != c.eval(&s.x).unwrap())
            .count() as f64
            / m as f64;
        assert!(
            (flips - 0.1).abs() <= 4.0 * (0.09 / m as f64).sqrt(),
            "{flips}"
        );
        assert_eq!(noisy, generate_agnostic_data(&c, 0.1, m, 3).unwrap());
        assert!(generate_agnostic_data(&c, 0.5, 10, 3).is_err());
    }

    #[test]
    fn constant_fits() {
        let all_pos = pts(&[(0.1, 1), (0.5, 1), (-2.0, 1)]);
        let f = fit_l1(&all_pos, 0, FitConfig::default()).unwrap();
        assert_eq!(f.expansion.coeff(&MultiIndex::zero(1)), 1.0);
        assert_eq!(f.loss, 0.0);
        let split = pts(&[(0.1, 1), (0.5, -1)]);
        let f = fit_l1(&split, 0, FitConfig::default()).unwrap();
        assert!(f.expansion.is_empty());
        assert_eq!(f.loss, 1.0);
    }

    #[test]
    fn fit_rejects_underdetermined() {
        let s = pts(&[(0.1, 1), (0.5, -1)]);
        assert!(fit_l1(&s, 3, FitConfig::default()).is_err());
    }

    #[test]
    fn fit_properties() {
        let c = halfspace();
        let data = generate_agnostic_data(&c, 0.1, 2000, 5).unwrap();
        let mut last = f64::INFINITY;
        for d in 0..=6 {
            let f = fit_l1(&data, d, FitConfig::default()).unwrap();
            assert!(f.loss <= 1.0 + 1e-12);
            assert!(f.loss <= last + 1e-6, "{d}: {} > {last}", f.loss);
            last = f.loss;
        }
        let neg: Vec<LabeledSample> = data
            .iter()
            .map(|s| LabeledSample {
                x: s.x.clone(),
                y: -s.y,
            })
            .collect();
        let a = fit_l1(&data, 5, FitConfig::default()).unwrap();
        let b = fit_l1(&neg, 5, FitConfig::default()).unwrap();
        assert_abs_diff_eq!(a.loss, b.loss, epsilon = 1e-6);
        for k in 0..=5u32 {
            let alpha = MultiIndex::univariate(k);
            assert_abs_diff_eq!(
                a.expansion.coeff(&alpha),
                -b.expansion.coeff(&alpha),
                epsilon = 1e-3
            );
        }
    }

    #[test]
    fn threshold_examples() {
        let p = HermiteExpansion::univariate([(1, 1.0)]);
        let s = pts(&[(1.0, -1), (2.0, -1), (4.0, 1), (5.0, 1)]);
        let t = choose_threshold(&p, &s).unwrap();
        assert_eq!((t.threshold, t.error), (3.0, 0.0));
        let zero = HermiteExpansion::new(1).unwrap();
        let s = pts(&[(1.0, -1), (2.0, 1), (4.0, 1), (5.0, -1), (6.0, 1)]);
        let t = choose_threshold(&zero, &s).unwrap();
        assert_eq!((t.threshold, t.error), (0.0, 0.4));
    }

    #[test]
    fn threshold_is_exhaustive_argmin() {
        let c = halfspace();
        let data = generate_agnostic_data(&c, 0.2, 1000, 9).unwrap();
        let p = HermiteExpansion::univariate([(0, 0.1), (1, -0.7), (3, 0.2)]);
        let choice = choose_threshold(&p, &data).unwrap();
        let scores: Vec<f64> = data.iter().map(|s| p.eval(&s.x).unwrap()).collect();
        let brute = |t: f64| {
            data.iter()
                .zip(&scores)
                .filter(|(s, &v)| sign(v - t) != s.y)
                .count() as f64
                / data.len() as f64
        };
        let mut cands = scores.clone();
        cands.sort_by(f64::total_cmp);
        let mids: Vec<f64> = cands.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        cands.extend(mids);
        cands.push(0.0);
        let best = cands
            .iter()
            .map(|&t| brute(t))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(choice.error, best);
        assert_eq!(brute(choice.threshold), best);
    }

    #[test]
    fn evaluation_baselines() {
        let c = halfspace();
        let own = Hypothesis {
            p: HermiteExpansion::univariate([(1, -1.0)]),
            threshold: 0.0,
        };
        let e = evaluate(&own, &c, 0.1, 200_000, 4).unwrap();
        assert!(e.within(0.1, 4.0), "{e:?}");
        let plus = Hypothesis {
            p: HermiteExpansion::univariate([(0, 1.0)]),
            threshold: 0.0,
        };
        let e = evaluate(&plus, &c, 0.0, 200_000, 4).unwrap();
        assert!(e.within(0.5, 4.0), "{e:?}");
        assert!(evaluate(&plus, &c, 0.5, 100, 4).is_err());
    }

    #[test]
    fn learn_constant_class() {
        let c = Concept::constant(2, 1).unwrap();
        let r = learn(&c, &LearnConfig::new(0.3, 0.0, 0.1, 2000, 50_000, 1)).unwrap();
        assert_eq!(r.degree, 0);
        assert_eq!(r.hypothesis.p.coeff(&MultiIndex::zero(2)), 1.0);
        assert!(r.test_error.mean <= 0.1 + 4.0 * r.test_error.stderr);
    }

    #[test]
    fn learn_is_deterministic_and_caps_degree() {
        let c = halfspace();
        let mut cfg = LearnConfig::new(0.3, crate::stats::normal_pdf(0.0), 0.0, 3000, 20_000, 12);
        cfg.degree_cap = 9;
        let a = learn(&c, &cfg).unwrap();
        let b = learn(&c, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.degree, 9);
        assert!(a.warning.is_some());
        assert!(a.test_error.mean <= 0.1);
    }
}
