//! Identifies a first-order ARX plant from white-noise input with recursive
//! least squares and compares the result with the batch fit.

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use regretlab::adaptive_sim::{arx_step, least_squares_fit, ArxSystem, RlsState};

fn main() -> regretlab::Result<()> {
    let system = ArxSystem::new(-0.45, 0.67, 0.01)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut rls = RlsState::with_prior(0.0, 1.0, 1e6)?;
    let mut samples = Vec::new();
    let (mut y_prev, mut u_prev) = (0.0, 0.0);
    for t in 1..=2000 {
        let e: f64 = StandardNormal.sample(&mut rng);
        let y = arx_step(&system, y_prev, u_prev, system.sigma_e() * e);
        let phi = Vector2::new(-y_prev, u_prev);
        rls.update(&phi, y);
        samples.push((phi, y));
        if [10, 100, 1000, 2000].contains(&t) {
            println!("t = {t:>4}: a_hat = {:+.5}, b_hat = {:+.5}", rls.a_hat(), rls.b_hat());
        }
        y_prev = y;
        u_prev = StandardNormal.sample(&mut rng);
    }
    let batch = least_squares_fit(&samples, 1.0);
    println!("batch:     a_hat = {:+.5}, b_hat = {:+.5}", batch.theta[0], batch.theta[1]);
    println!("true:      a0    = {:+.5}, b0    = {:+.5}", system.a0(), system.b0());
    Ok(())
}
