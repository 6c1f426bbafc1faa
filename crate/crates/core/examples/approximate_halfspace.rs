//! Plan `(rho, d)`, build `Pi_d T_rho f`, and compare its L1 error with the bound.

use hermite_l1::approx::{bound_check, plan, ApproximationPlan, CoefficientMethod, ErrorMethod};
use hermite_l1::concepts::Concept;
use hermite_l1::stats::normal_pdf;

fn main() -> hermite_l1::Result<()> {
    let c = Concept::axis_halfspace(1, 0, 0.0)?;
    for eps in [0.5, 0.3] {
        let p = plan(eps, normal_pdf(0.0))?;
        let r = bound_check(
            &c,
            &p,
            CoefficientMethod::Exact,
            ErrorMethod::Quadrature,
            None,
        )?;
        println!(
            "eps {eps}: rho {:.5}, d {}, L1 error {:.5}, bound {:.5}, pass {}",
            p.rho, p.degree, r.measured_l1_error.mean, r.bound, r.pass
        );
    }

    let two_d = Concept::halfspace(vec![0.6, 0.8], 0.3)?;
    let p = ApproximationPlan::explicit(0.9, 10)?;
    let gns = hermite_l1::concepts::gns_mc(&two_d, 0.1, 400_000, 1)?;
    let r = bound_check(
        &two_d,
        &p,
        CoefficientMethod::Quadrature {
            points_per_axis: 200,
        },
        ErrorMethod::MonteCarlo {
            samples: 400_000,
            seed: 2,
        },
        Some(gns),
    )?;
    println!(
        "2D halfspace, rho 0.9, d 10: L1 {:.5} +/- {:.5}, bound {:.5} (+ slack {:.5}), pass {}",
        r.measured_l1_error.mean, r.measured_l1_error.stderr, r.bound, r.statistical_slack, r.pass
    );
    Ok(())
}
