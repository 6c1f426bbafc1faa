//! Hermite truncations of `sign`: coefficients, L1 error scaling, dual form.

use hermite_l1::sign::{
    log_log_slope, sign_coefficient, sign_study_row, truncation, truncation_eval_direct,
    truncation_eval_integral,
};

fn main() -> hermite_l1::Result<()> {
    for k in [1, 3, 5, 7] {
        println!("<sign, H_{k}> = {:.10}", sign_coefficient(k));
    }
    let degrees = [11usize, 21, 41, 81, 161];
    let rows: Vec<_> = degrees
        .iter()
        .map(|&d| sign_study_row(d))
        .collect::<Result<_, _>>()?;
    for r in &rows {
        println!(
            "d {:>4}: L1 {:.6}, Parseval residual {:.6}",
            r.d, r.l1_error, r.parseval_residual
        );
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.d as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.l1_error).collect();
    println!("log-log slope {:.4}", log_log_slope(&xs, &ys));

    let t = truncation(101)?;
    let x = 0.3;
    println!(
        "Pi_101 sign(0.3): direct {:.10}, integral {:.10}",
        truncation_eval_direct(&t, x),
        truncation_eval_integral(101, x, 1e-10)?
    );
    Ok(())
}
