//! Orthonormal Hermite evaluation, Gauss–Hermite quadrature, and sparse expansions.

use hermite_l1::hermite::{expectation, gauss_hermite_rule, hermite_eval, hermite_zero};
use hermite_l1::{HermiteExpansion, MultiIndex};

fn main() -> hermite_l1::Result<()> {
    for k in 0..=4 {
        println!("H_{k}(0.5) = {:.6}", hermite_eval(k, 0.5));
    }
    println!("H_100(0) = {:e}", hermite_zero(100));

    let rule = gauss_hermite_rule(20, 2)?;
    let p = HermiteExpansion::from_terms(
        2,
        [
            (MultiIndex::new(vec![0, 0]), 0.5),
            (MultiIndex::new(vec![2, 1]), -1.25),
            (MultiIndex::new(vec![0, 3]), 0.75),
        ],
    )?;
    let second_moment = expectation(|x| p.eval(x).unwrap().powi(2), &rule)?;
    println!(
        "E[p^2] = {second_moment:.12}, ||p||^2 = {:.12}",
        p.l2_norm().powi(2)
    );
    println!("truncated to degree 2: {}", p.truncate(2).to_json());
    Ok(())
}
