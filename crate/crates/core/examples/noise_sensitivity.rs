//! Gaussian noise sensitivity and surface area of concepts.

use hermite_l1::concepts::{gns_gsa_bound_check, gns_mc, gsa_mc, noise_distance_check, Concept};
use hermite_l1::noise::NoiseLevel;

fn main() -> hermite_l1::Result<()> {
    let hs = Concept::from_json(r#"{"kind": "halfspace", "w": [0.6, 0.8], "c": 0.0}"#)?;
    let g = gns_mc(&hs, 0.1, 1_000_000, 7)?;
    println!(
        "GNS_0.1 = {:.5} +/- {:.5} (closed form {:.5})",
        g.mean,
        g.stderr,
        hs.gns_closed_form(0.1).unwrap()
    );

    let shifted = Concept::axis_halfspace(1, 0, 1.0)?;
    let gsa = gsa_mc(&shifted, &[0.02, 0.01], 2_000_000, 3)?;
    println!(
        "GSA = {:.5} +/- {:.5} (closed form {:.5})",
        gsa.estimate.mean,
        gsa.estimate.stderr,
        shifted.gsa_closed_form().unwrap()
    );

    let ball = Concept::ball(vec![0.0; 3], 1.5)?;
    let gsa = gsa_mc(&ball, &[0.02, 0.01], 2_000_000, 4)?;
    println!(
        "ball GSA = {:.5} (closed form {:.5})",
        gsa.estimate.mean,
        ball.gsa_closed_form().unwrap()
    );

    let pair = noise_distance_check(&hs, NoiseLevel::new(0.9)?, 500_000, 9)?;
    println!(
        "E|f(X) - f(Y)| = {:.5}, 2 GNS = {:.5}, z = {:.2}",
        pair.lhs.mean, pair.rhs.mean, pair.z
    );

    for row in gns_gsa_bound_check(&hs, &[0.5, 0.9, 0.99], None, 200_000, 2)? {
        println!(
            "rho {:.2}: GNS {:.5} <= {:.5}: {}",
            row.rho, row.gns.mean, row.bound, row.pass
        );
    }
    Ok(())
}
