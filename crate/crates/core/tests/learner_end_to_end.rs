use hermite_l1::concepts::Concept;
use hermite_l1::learner::{
    choose_threshold, evaluate, fit_l1, generate_agnostic_data, FitConfig, Hypothesis,
};
use hermite_l1::sign::truncation_l1_error;

#[test]
fn noiseless_degree_fifteen() {
    let c = Concept::axis_halfspace(1, 0, 0.0).unwrap();
    let train = generate_agnostic_data(&c, 0.0, 5000, 21).unwrap();
    let fit = fit_l1(&train, 15, FitConfig::default()).unwrap();
    // The L1-optimal fit is no worse than the degree-15 truncation of sign, up to sampling.
    assert!(
        fit.loss <= truncation_l1_error(15).unwrap() + 0.05,
        "{}",
        fit.loss
    );
    let t = choose_threshold(&fit.expansion, &train).unwrap();
    let h = Hypothesis {
        p: fit.expansion,
        threshold: t.threshold,
    };
    let e = evaluate(&h, &c, 0.0, 100_000, 22).unwrap();
    assert!(e.mean <= 0.1, "{e:?}");
}

#[test]
fn concept_achieves_noise_rate() {
    let c = Concept::axis_halfspace(1, 0, 0.5).unwrap();
    let m = 50_000;
    let data = generate_agnostic_data(&c, 0.1, m, 4).unwrap();
    let err = data.iter().filter(|s| c.eval(&s.x).unwrap() != s.y).count() as f64 / m as f64;
    assert!((err - 0.1).abs() <= 4.0 * (0.09 / m as f64).sqrt(), "{err}");
}
