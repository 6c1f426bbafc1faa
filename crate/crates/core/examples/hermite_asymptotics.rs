//! Plancherel–Rotach remainders, envelopes, and the tail integrals.

use hermite_l1::sign::{
    appendix_integral_checks, christoffel_darboux_residual, hermite_envelope,
    plancherel_rotach_remainder, sine_integral_constant,
};

fn main() -> hermite_l1::Result<()> {
    for d in [201usize, 2001] {
        let sup = (0..=40)
            .map(|i| plancherel_rotach_remainder(d, i as f64 / 40.0).map(|s| s.r.abs()))
            .try_fold(0.0f64, |m, r| r.map(|v| m.max(v)))?;
        let tmax = (d as f64).powf(1.0 / 6.0);
        let env = (0..=200)
            .map(|i| hermite_envelope(d, tmax * i as f64 / 200.0))
            .fold(0.0, f64::max);
        println!("d {d}: sup |r_d| on [0,1] = {sup:.3e}, max envelope = {env:.4}");
    }
    println!(
        "Christoffel–Darboux residual d=40, x=1.5: {:.2e}",
        christoffel_darboux_residual(40, 1.5)?
    );
    let (c, _) = sine_integral_constant(&[1.0, 10.0, 100.0, 1000.0], 1e-10)?;
    println!("sup |Si| ratio constant: {c:.6}");
    let a = appendix_integral_checks(101, 1.0)?;
    println!(
        "small-t {:.5} <= {:?}; large-t {:.5} <= {:.5}",
        a.small_t, a.small_t_bound, a.large_t, a.large_t_bound
    );
    Ok(())
}
