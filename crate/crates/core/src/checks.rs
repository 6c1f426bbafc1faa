//! The invariant suite behind `hermite-l1 check`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::approx::{bound_check, plan, CoefficientMethod, ErrorMethod};
use crate::concepts::{gns_halfspace_closed_form, gns_mc, noise_distance_check, sign, Concept};
use crate::error::Result;
use crate::hermite::{
    coeff_via_derivatives, enumerate_multi_indices, expectation, gauss_hermite_rule, hermite_eval,
    hermite_table, hermite_zero, HermiteExpansion, MultiIndex,
};
use crate::learner::{choose_threshold, fit_l1, generate_agnostic_data, FitConfig, LabeledSample};
use crate::noise::{apply_to_expansion, eigen_check, tail_bound_check, NoiseLevel};
use crate::sign::{
    christoffel_darboux_residual, sign_coefficient, sign_coefficient_quadrature, truncation,
    truncation_eval_direct, truncation_eval_integral, truncation_l1_error,
};
use crate::stats::{combined_stderr, derive_seed, normal_pdf, McRng};

/// One invariant: `pass` is `value <= limit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub group: String,
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

fn le(group: &str, name: &str, value: f64, limit: f64) -> CheckOutcome {
    CheckOutcome {
        group: group.into(),
        name: name.into(),
        value,
        limit,
        pass: value <= limit,
    }
}

/// Boolean invariants report `value = 0` on success and `1` on failure.
fn holds(group: &str, name: &str, ok: bool) -> CheckOutcome {
    le(group, name, if ok { 0.0 } else { 1.0 }, 0.0)
}

fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

pub fn hermite_checks() -> Result<Vec<CheckOutcome>> {
    let g = "hermite";
    let mut out = Vec::new();

    let rule = gauss_hermite_rule(13, 1)?;
    let mut worst = 0.0f64;
    for i in 0..=12 {
        for j in 0..=12 {
            let e = expectation(|x| hermite_eval(i, x[0]) * hermite_eval(j, x[0]), &rule)?;
            worst = worst.max((e - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    out.push(le(g, "orthonormality", worst, 1e-10));

    let h = 1e-5;
    let mut worst = 0.0f64;
    for k in 1..=50 {
        for i in 0..=24 {
            let x = -3.0 + 0.25 * i as f64;
            // Five-point central stencil.
            let fd = (8.0 * (hermite_eval(k, x + h) - hermite_eval(k, x - h))
                - (hermite_eval(k, x + 2.0 * h) - hermite_eval(k, x - 2.0 * h)))
                / (12.0 * h);
            worst = worst.max((fd - (k as f64).sqrt() * hermite_eval(k - 1, x)).abs());
        }
    }
    out.push(le(g, "derivative_identity", worst, 1e-8));

    let t: f64 = 0.3;
    let mut worst = 0.0f64;
    for i in 0..=16 {
        let x = -2.0 + 0.25 * i as f64;
        let sum: f64 = hermite_table(40, x)
            .iter()
            .enumerate()
            .map(|(k, hk)| hk * (k as f64 * t.ln() - 0.5 * ln_factorial(k)).exp())
            .sum();
        worst = worst.max((sum - (t * x - 0.5 * t * t).exp()).abs());
    }
    out.push(le(g, "generating_function", worst, 1e-10));

    // Repeated central differences of phi; the k-th difference uses step 0.05.
    let step: f64 = 0.05;
    let mut worst = 0.0f64;
    for k in 0..=6usize {
        for x in [-1.5, -0.5, 0.0, 0.7, 1.8] {
            let mut binom = 1.0;
            let mut diff = 0.0;
            for j in 0..=k {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                diff += s * binom * normal_pdf(x + (k as f64 / 2.0 - j as f64) * step);
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
            let deriv = diff / step.powi(k as i32);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let rhs = sign * deriv / ln_factorial(k).exp().sqrt();
            worst = worst.max((hermite_eval(k, x) * normal_pdf(x) - rhs).abs());
        }
    }
    out.push(le(g, "density_identity", worst, 1e-3));

    let worst = (0..=200)
        .map(|k| (hermite_zero(k) - hermite_eval(k, 0.0)).abs())
        .fold(0.0, f64::max);
    out.push(le(g, "zero_values", worst, 1e-12));

    let worst = [100usize, 400, 1600]
        .iter()
        .map(|&d| {
            let scaled = (hermite_zero(d) * (PI / 2.0).powf(0.25) * (d as f64).powf(0.25)).abs();
            (scaled - 1.0).abs() * d as f64
        })
        .fold(0.0, f64::max);
    out.push(le(g, "zero_asymptotics_times_d", worst, 5.0));

    let rule = gauss_hermite_rule(40, 1)?;
    let mut worst = 0.0f64;
    for k in 0..=8u32 {
        let target = (-0.5 * ln_factorial(k as usize)).exp();
        let alpha = MultiIndex::univariate(k);
        let inner = expectation(
            |x| (x[0] - 0.5).exp() * hermite_eval(k as usize, x[0]),
            &rule,
        )?;
        let via = coeff_via_derivatives(|_, x| (x[0] - 0.5).exp(), &alpha, &rule)?;
        worst = worst.max((inner - target).abs()).max((inner - via).abs());
    }
    out.push(le(g, "derivative_coefficients", worst, 1e-8));
    Ok(out)
}

fn random_expansion(rng: &mut McRng, n: usize, degree: usize) -> Result<HermiteExpansion> {
    let alphas = enumerate_multi_indices(n, degree);
    let terms: Vec<(MultiIndex, f64)> = alphas
        .into_iter()
        .filter_map(|a| (rng.random::<f64>() < 0.5).then(|| (a, rng.random_range(-1.0..1.0))))
        .collect();
    HermiteExpansion::from_terms(n, terms)
}

pub fn noise_checks(seed: u64) -> Result<Vec<CheckOutcome>> {
    let g = "noise";
    let mut out = Vec::new();
    let mut rng = McRng::seed_from_u64(derive_seed(seed, 100));
    let mut semigroup = 0.0f64;
    let mut contraction = true;
    let mut commutation = true;
    let mut tail = true;
    for trial in 0..20 {
        let p = random_expansion(&mut rng, 1 + trial % 3, 8)?;
        let r1 = NoiseLevel::new(rng.random())?;
        let r2 = NoiseLevel::new(rng.random())?;
        let two = apply_to_expansion(&apply_to_expansion(&p, r1), r2);
        let one = apply_to_expansion(&p, NoiseLevel::new(r1.rho() * r2.rho())?);
        for (a, c) in p.iter() {
            let gap = (two.coeff(a) - one.coeff(a)).abs();
            semigroup = semigroup.max(gap / (f64::EPSILON * c.abs()));
        }
        contraction &= apply_to_expansion(&p, r1).l2_norm() <= p.l2_norm();
        let d = trial % 9;
        commutation &=
            apply_to_expansion(&p, r1).truncate(d) == apply_to_expansion(&p.truncate(d), r1);
        tail &= tail_bound_check(&p, r1, d).pass;
    }
    out.push(le(g, "semigroup_eps_units", semigroup, 4.0));
    out.push(holds(g, "contraction", contraction));
    out.push(holds(g, "commutation_with_truncation", commutation));
    out.push(holds(g, "tail_bound", tail));

    let grid: Vec<f64> = (0..20).map(|i| -2.0 + 4.0 * i as f64 / 19.0).collect();
    let report = eigen_check(
        3,
        NoiseLevel::new(0.7)?,
        &grid,
        100_000,
        derive_seed(seed, 101),
    )?;
    out.push(le(g, "eigen_pooled_abs_z", report.pooled_z.abs(), 4.0));
    Ok(out)
}

pub fn concept_checks(seed: u64) -> Result<Vec<CheckOutcome>> {
    let g = "concepts";
    let mut out = Vec::new();
    let samples = 200_000;
    let z = |a: f64, sa: f64, b: f64, sb: f64| (a - b) / combined_stderr(sa, sb);

    let c = Concept::axis_halfspace(2, 0, 0.4)?;
    let a = gns_mc(&c, 0.1, samples, derive_seed(seed, 200))?;
    let b = gns_mc(&c.negate(), 0.1, samples, derive_seed(seed, 201))?;
    out.push(le(
        g,
        "gns_symmetry_abs_z",
        z(a.mean, a.stderr, b.mean, b.stderr).abs(),
        4.0,
    ));

    let lo = gns_mc(&c, 0.05, samples, derive_seed(seed, 202))?;
    let hi = gns_mc(&c, 0.2, samples, derive_seed(seed, 203))?;
    out.push(le(
        g,
        "gns_monotonicity_z",
        z(lo.mean, lo.stderr, hi.mean, hi.stderr),
        4.0,
    ));

    let e1 = Concept::halfspace(vec![1.0, 0.0], 0.0)?;
    let e2 = Concept::halfspace(vec![0.6, 0.8], 0.0)?;
    let a = gns_mc(&e1, 0.1, samples, derive_seed(seed, 204))?;
    let b = gns_mc(&e2, 0.1, samples, derive_seed(seed, 205))?;
    out.push(le(
        g,
        "gns_rotation_abs_z",
        z(a.mean, a.stderr, b.mean, b.stderr).abs(),
        4.0,
    ));

    let mut slack = f64::NEG_INFINITY;
    for i in 0..50 {
        let rho = i as f64 / 49.0;
        let gns = gns_halfspace_closed_form(1.0 - rho)?;
        let bound = PI.sqrt() * (1.0 - rho).sqrt() * normal_pdf(0.0);
        slack = slack.max(gns - bound);
    }
    out.push(le(g, "gns_gsa_closed_form_excess", slack, 1e-12));

    let one = Concept::axis_halfspace(1, 0, 0.0)?;
    let pair = noise_distance_check(&one, NoiseLevel::new(0.9)?, samples, derive_seed(seed, 206))?;
    out.push(le(g, "noise_distance_abs_z", pair.z.abs(), 4.0));
    Ok(out)
}

pub fn approx_checks() -> Result<Vec<CheckOutcome>> {
    let g = "approx";
    let mut out = Vec::new();
    let mut monotone = true;
    let eps: Vec<f64> = (1..=10).map(|i| 0.1 * i as f64).collect();
    let gammas = [0.0, 0.1, 0.2, 0.3, normal_pdf(0.0)];
    for &gm in &gammas {
        for w in eps.windows(2) {
            monotone &= plan(w[1], gm)?.degree <= plan(w[0], gm)?.degree;
        }
    }
    for &e in &eps {
        for w in gammas.windows(2) {
            monotone &= plan(e, w[0])?.degree <= plan(e, w[1])?.degree;
        }
    }
    out.push(holds(g, "planner_monotonicity", monotone));

    let c = Concept::axis_halfspace(1, 0, 0.0)?;
    for (name, eps) in [("end_to_end_eps_0.5", 0.5), ("end_to_end_eps_0.3", 0.3)] {
        let pl = plan(eps, normal_pdf(0.0))?;
        let r = bound_check(
            &c,
            &pl,
            CoefficientMethod::Exact,
            ErrorMethod::Quadrature,
            None,
        )?;
        out.push(le(g, name, r.measured_l1_error.mean, eps));
        out.push(holds(
            g,
            &format!("{name}_build_degree"),
            r.built.degree_bound() <= pl.degree,
        ));
        out.push(holds(g, &format!("{name}_l1_le_l2"), r.l1_le_l2));
        out.push(holds(g, &format!("{name}_bound"), r.pass));
    }
    Ok(out)
}

pub fn sign_checks() -> Result<Vec<CheckOutcome>> {
    let g = "sign";
    let mut out = Vec::new();
    let mut worst = 0.0f64;
    for k in (1..=25).step_by(2) {
        worst = worst.max((sign_coefficient_quadrature(k)? - sign_coefficient(k)).abs());
    }
    out.push(le(g, "coefficient_identity", worst, 1e-8));

    let tol = 1e-8;
    let mut worst = 0.0f64;
    let mut antisymmetric = true;
    for d in [11usize, 101] {
        let t = truncation(d)?;
        for j in 1..=20 {
            let x = 0.15 * j as f64;
            let direct = truncation_eval_direct(&t, x);
            worst = worst.max((direct - truncation_eval_integral(d, x, tol)?).abs());
            antisymmetric &= truncation_eval_direct(&t, -x) == -direct;
        }
    }
    out.push(le(g, "dual_form_agreement", worst, 10.0 * tol));
    out.push(holds(g, "antisymmetry", antisymmetric));

    let residuals: Vec<f64> = [1usize, 11, 101, 1001, 9999]
        .iter()
        .map(|&d| truncation(d).map(|t| t.parseval_residual()))
        .collect::<Result<_>>()?;
    let decreasing =
        residuals.windows(2).all(|w| w[1] < w[0]) && residuals.iter().all(|&r| r > 0.0);
    out.push(holds(g, "parseval_positive_decreasing", decreasing));
    out.push(le(g, "parseval_residual_9999", residuals[4], 0.01));

    let errors: Vec<f64> = [11usize, 21, 41, 81]
        .iter()
        .map(|&d| truncation_l1_error(d))
        .collect::<Result<_>>()?;
    out.push(holds(
        g,
        "l1_error_decreasing",
        errors.windows(2).all(|w| w[1] < w[0]),
    ));

    let mut worst = 0.0f64;
    for d in 1..=50 {
        for x in [-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0] {
            worst = worst.max(christoffel_darboux_residual(d, x)?);
        }
    }
    out.push(le(g, "christoffel_darboux", worst, 1e-8));
    Ok(out)
}

pub fn learner_checks(seed: u64) -> Result<Vec<CheckOutcome>> {
    let g = "learner";
    let mut out = Vec::new();
    let c = Concept::axis_halfspace(1, 0, 0.2)?;
    let data = generate_agnostic_data(&c, 0.15, 600, derive_seed(seed, 300))?;
    let config = FitConfig::default();
    let mut losses = Vec::new();
    for d in 0..=6 {
        losses.push(fit_l1(&data, d, config)?.loss);
    }
    out.push(le(
        g,
        "loss_at_most_one",
        losses.iter().copied().fold(0.0, f64::max),
        1.0,
    ));
    let increase = losses
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    out.push(le(g, "loss_monotone_in_degree", increase, config.tol));

    let flipped: Vec<LabeledSample> = data
        .iter()
        .map(|s| LabeledSample {
            x: s.x.clone(),
            y: -s.y,
        })
        .collect();
    let a = fit_l1(&data, 4, config)?;
    let b = fit_l1(&flipped, 4, config)?;
    let gap = a
        .expansion
        .iter()
        .map(|(alpha, v)| (v + b.expansion.coeff(alpha)).abs())
        .fold(0.0, f64::max);
    out.push(le(
        g,
        "negation_loss_gap",
        (a.loss - b.loss).abs(),
        config.tol,
    ));
    out.push(le(g, "negation_coefficient_gap", gap, 1e-3));

    let choice = choose_threshold(&a.expansion, &data)?;
    let scores: Vec<f64> = data
        .iter()
        .map(|s| a.expansion.eval(&s.x))
        .collect::<Result<_>>()?;
    let err_at = |t: f64| {
        data.iter()
            .zip(&scores)
            .filter(|(s, &v)| sign(v - t) != s.y)
            .count() as f64
            / data.len() as f64
    };
    let best = scores
        .iter()
        .copied()
        .chain(std::iter::once(0.0))
        .map(err_at)
        .fold(f64::INFINITY, f64::min);
    out.push(holds(
        g,
        "threshold_exhaustive_argmin",
        choice.error == best && err_at(choice.threshold) == best,
    ));

    let again = fit_l1(&data, 4, config)?;
    out.push(holds(
        g,
        "fit_determinism",
        again.expansion == a.expansion && again.loss == a.loss,
    ));
    Ok(out)
}

/// Runs every group; Monte-Carlo checks derive their seeds from `seed`.
pub fn run_all(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = hermite_checks()?;
    out.extend(noise_checks(seed)?);
    out.extend(concept_checks(seed)?);
    out.extend(approx_checks()?);
    out.extend(sign_checks()?);
    out.extend(learner_checks(seed)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let all = run_all(1).unwrap();
        let failed: Vec<_> = all.iter().filter(|c| !c.pass).collect();
        assert!(failed.is_empty(), "{failed:#?}");
        assert!(all.len() > 30);
    }
}
