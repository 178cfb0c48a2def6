//! A reduced decaying-versus-immediate sweep under linear-quadratic control.

use regretlab::cli::config::ExperimentConfig;
use regretlab::monte_carlo::{sweep_lqac, Grid};

fn main() -> regretlab::Result<()> {
    let cfg = ExperimentConfig {
        horizon: 2000,
        mc_reps_lqac: 20,
        sigma_grid: Grid::new(1e-4, 1.0, 6)?,
        ..ExperimentConfig::default()
    };
    let sweep = sweep_lqac(&cfg.sweep_config()?)?;
    println!("{:>10} {:>12} {:>10} {:>12} {:>10}", "sigma_e2", "decaying", "alpha*", "immediate", "beta*");
    for r in &sweep.rows {
        println!(
            "{:>10.3e} {:>12.4e} {:>10.3e} {:>12.4e} {:>10.3e}",
            r.sigma_e2, r.decaying.mean, r.alpha_star, r.immediate.mean, r.beta_star
        );
    }
    Ok(())
}
