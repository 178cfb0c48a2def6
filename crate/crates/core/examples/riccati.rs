//! Solves a few Riccati equations and checks the residual and closed-loop
//! stability of the resulting gain.

use nalgebra::DMatrix;
use regretlab::linalg::{lqr_gain, riccati_residual, solve_dare, solve_scalar_dare, spectral_radius, PsdMatrix};

fn main() -> regretlab::Result<()> {
    // a = b = q = r = 1 gives the golden ratio
    let p = solve_scalar_dare(1.0, 1.0, 1.0, 1.0)?;
    println!("scalar p = {p:.15} (golden ratio {:.15})", (1.0 + 5f64.sqrt()) / 2.0);

    let a = DMatrix::from_row_slice(2, 2, &[1.1, 0.3, 0.0, 0.8]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let q = PsdMatrix::identity(2);
    let p = solve_dare(&a, &b, &q, 0.5)?;
    let k = lqr_gain(&a, &b, 0.5, &p)?;
    println!("P = {:?}", p.sym().to_rows());
    println!("K = {:?}", k.as_slice());
    println!("residual = {:.3e}", riccati_residual(&a, &b, &q, 0.5, &p));
    println!(
        "spectral radius: open loop {:.4}, closed loop {:.4}",
        spectral_radius(&a),
        spectral_radius(&(&a - &b * &k))
    );
    Ok(())
}
