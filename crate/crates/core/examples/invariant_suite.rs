//! Runs the same invariant suite as `hermite-l1 check`.

fn main() -> hermite_l1::Result<()> {
    let checks = hermite_l1::checks::run_all(1)?;
    for c in &checks {
        println!(
            "{:<5} {}/{}: {:e} (limit {:e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.group,
            c.name,
            c.value,
            c.limit
        );
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("{} checks, {failed} failed", checks.len());
    Ok(())
}
