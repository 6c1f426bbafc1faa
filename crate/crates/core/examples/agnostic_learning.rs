//! L1 polynomial regression with thresholding on noisy halfspace labels.

use hermite_l1::concepts::Concept;
use hermite_l1::learner::{learn, LearnConfig};
use hermite_l1::stats::normal_pdf;

fn main() -> hermite_l1::Result<()> {
    let c = Concept::axis_halfspace(1, 0, 0.0)?;
    for eta in [0.0, 0.1] {
        let r = learn(
            &c,
            &LearnConfig::new(0.3, normal_pdf(0.0), eta, 20_000, 100_000, 42),
        )?;
        if let Some(w) = &r.warning {
            println!("warning: {w}");
        }
        println!(
            "eta {eta}: degree {}, train L1 {:.4}, threshold {:.4}, test error {:.4} +/- {:.4}, excess {:.4}",
            r.degree, r.train_l1_loss, r.hypothesis.threshold, r.test_error.mean, r.test_error.stderr, r.excess
        );
    }
    Ok(())
}
