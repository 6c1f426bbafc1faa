//! The Ornstein–Uhlenbeck operator on expansions and by Monte Carlo.

use hermite_l1::noise::{apply_pointwise_mc, apply_to_expansion, eigen_check, NoiseLevel};
use hermite_l1::HermiteExpansion;

fn main() -> hermite_l1::Result<()> {
    let rho = NoiseLevel::new(0.8)?;
    let p = HermiteExpansion::univariate([(0, 1.0), (1, 1.0), (3, 1.0)]);
    println!("T_rho p = {}", apply_to_expansion(&p, rho).to_json());

    let x = [0.7];
    let exact = apply_to_expansion(&p, rho).eval(&x)?;
    let mc = apply_pointwise_mc(|y: &[f64]| p.eval(y).unwrap(), rho, &x, 200_000, 11)?;
    println!(
        "at x = 0.7: exact {exact:.5}, mc {:.5} +/- {:.5}",
        mc.mean, mc.stderr
    );

    let grid: Vec<f64> = (0..9).map(|i| -2.0 + 0.5 * i as f64).collect();
    let report = eigen_check(4, rho, &grid, 200_000, 5)?;
    println!(
        "eigenrelation k=4: max |z| = {:.2}, pass = {}",
        report.max_z, report.pass
    );
    Ok(())
}
