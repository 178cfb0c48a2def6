//! A reduced lazy-versus-immediate sweep under minimum-variance control.

use regretlab::cli::config::ExperimentConfig;
use regretlab::monte_carlo::{mvac_crossover, sweep_mvac, Grid};

fn main() -> regretlab::Result<()> {
    let cfg = ExperimentConfig {
        horizon: 2000,
        mc_reps_mvac: 50,
        sigma_grid: Grid::new(1e-5, 1.0, 8)?,
        ..ExperimentConfig::default()
    };
    let sweep = sweep_mvac(&cfg.sweep_config()?)?;
    println!("{:>10} {:>12} {:>12} {:>10}", "sigma_e2", "lazy", "immediate", "beta*");
    for r in &sweep.rows {
        println!("{:>10.3e} {:>12.4e} {:>12.4e} {:>10.3e}", r.sigma_e2, r.lazy.mean, r.immediate.mean, r.beta_star);
    }
    match mvac_crossover(&sweep.rows) {
        Some(s) => println!("immediate wins from sigma_e2 = {s:.3e}"),
        None => println!("no crossover on this grid"),
    }
    Ok(())
}
