use approx::assert_abs_diff_eq;
use hermite_l1::hermite::{
    coeff_via_derivatives, enumerate_multi_indices, expectation, gauss_hermite_rule, hermite_eval,
    hermite_table,
};
use hermite_l1::{HermiteExpansion, MultiIndex};
use proptest::prelude::*;

fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

#[test]
fn orthonormality() {
    let rule = gauss_hermite_rule(30, 1).unwrap();
    for i in 0..=12 {
        for j in 0..=12 {
            let e = expectation(|x| hermite_eval(i, x[0]) * hermite_eval(j, x[0]), &rule).unwrap();
            assert_abs_diff_eq!(e, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
        }
    }
}

#[test]
fn derivative_identity() {
    let h = 1e-5;
    for k in 1..=50 {
        for x in [-2.3, -0.7, 0.0, 0.4, 1.9] {
            let fd = (hermite_eval(k, x + h) - hermite_eval(k, x - h)) / (2.0 * h);
            let exact = (k as f64).sqrt() * hermite_eval(k - 1, x);
            let scale = hermite_eval(k, x).abs().max(exact.abs()).max(1.0);
            assert!(
                (fd - exact).abs() <= 1e-6 * scale,
                "k={k} x={x}: {fd} vs {exact}"
            );
        }
    }
}

#[test]
fn generating_function() {
    let t: f64 = 0.3;
    let mut x = -2.0;
    while x <= 2.0 {
        let table = hermite_table(40, x);
        let sum: f64 = table
            .iter()
            .enumerate()
            .map(|(k, hk)| hk * (k as f64 * t.ln() - 0.5 * ln_factorial(k)).exp())
            .sum();
        assert_abs_diff_eq!(sum, (t * x - 0.5 * t * t).exp(), epsilon = 1e-10);
        x += 0.25;
    }
}

/// Coefficients of `q` with `d^k/dx^k phi = q(x) phi(x)`, from `(q phi)' = (q' - x q) phi`.
fn density_derivative_poly(k: usize) -> Vec<f64> {
    let mut q = vec![1.0];
    for _ in 0..k {
        let mut next = vec![0.0; q.len() + 1];
        for (i, &c) in q.iter().enumerate() {
            if i > 0 {
                next[i - 1] += i as f64 * c;
            }
            next[i + 1] -= c;
        }
        q = next;
    }
    q
}

#[test]
fn density_identity() {
    for k in 0..=6 {
        let q = density_derivative_poly(k);
        for x in [-2.5, -1.0, -0.2, 0.0, 0.6, 1.7, 3.0] {
            let qx: f64 = q.iter().rev().fold(0.0, |acc, c| acc * x + c);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let rhs = sign * qx / ln_factorial(k).exp().sqrt();
            assert_abs_diff_eq!(hermite_eval(k, x), rhs, epsilon = 1e-12);
        }
    }
}

#[test]
fn coefficients_from_derivatives() {
    let rule = gauss_hermite_rule(40, 1).unwrap();
    for k in 0..=10u32 {
        let c = coeff_via_derivatives(|_, x| (x[0] - 0.5).exp(), &MultiIndex::univariate(k), &rule)
            .unwrap();
        assert_abs_diff_eq!(c, (-0.5 * ln_factorial(k as usize)).exp(), epsilon = 1e-12);
    }
    let rule = gauss_hermite_rule(30, 2).unwrap();
    for alpha in enumerate_multi_indices(2, 5) {
        let c = coeff_via_derivatives(|_, x| (x[0] + x[1] - 1.0).exp(), &alpha, &rule).unwrap();
        assert_abs_diff_eq!(c, (-0.5 * alpha.ln_factorial()).exp(), epsilon = 1e-12);
    }
    assert!(coeff_via_derivatives(
        |_, _| 1.0,
        &MultiIndex::zero(2),
        &gauss_hermite_rule(4, 1).unwrap()
    )
    .is_err());
}

fn expansion_strategy() -> impl Strategy<Value = HermiteExpansion> {
    (1usize..=3).prop_flat_map(|n| {
        let alphas = enumerate_multi_indices(n, 6);
        let len = alphas.len();
        prop::collection::vec((0..len, -2.0f64..2.0), 0..12).prop_map(move |terms| {
            HermiteExpansion::from_terms(n, terms.into_iter().map(|(i, c)| (alphas[i].clone(), c)))
                .unwrap()
        })
    })
}

proptest! {
    #[test]
    fn parseval_matches_quadrature(p in expansion_strategy()) {
        let rule = gauss_hermite_rule(8, p.dimension()).unwrap();
        let e = expectation(|x| p.eval(x).unwrap().powi(2), &rule).unwrap();
        let norm2 = p.l2_norm().powi(2);
        prop_assert!((e - norm2).abs() <= 1e-10 * (1.0 + norm2), "{e} vs {norm2}");
    }

    #[test]
    fn truncation_splits_norm(p in expansion_strategy(), d in 0usize..7) {
        let t = p.truncate(d);
        prop_assert!(t.iter().all(|(a, _)| a.degree() <= d));
        prop_assert!(p.iter().filter(|(a, _)| a.degree() <= d).all(|(a, c)| t.coeff(a) == c));
        let tail = p.sub(&t).unwrap();
        prop_assert!(tail.iter().all(|(a, _)| a.degree() > d));
        let lhs = p.l2_norm().powi(2);
        let rhs = t.l2_norm().powi(2) + tail.l2_norm().powi(2);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs));
    }
}

#[test]
fn values_at_zero() {
    use hermite_l1::hermite::hermite_zero;
    for k in 0..=200 {
        assert_abs_diff_eq!(hermite_zero(k), hermite_eval(k, 0.0), epsilon = 1e-12);
    }
    for d in [100usize, 400, 1600] {
        let scaled =
            (hermite_zero(d) * (std::f64::consts::FRAC_PI_2).powf(0.25) * (d as f64).powf(0.25))
                .abs();
        let slack = 5.0 / d as f64;
        assert!(
            (1.0 - slack..=1.0 + slack).contains(&scaled),
            "d={d}: {scaled}"
        );
    }
}
