//! Traces one lazy and one immediate realization with the same noise and
//! prints where their cumulative regrets separate.

use regretlab::adaptive_sim::ExplorationPolicy;
use regretlab::cli::commands::{cmd_single_run, ControllerKind, SingleRunRequest};
use regretlab::cli::config::ExperimentConfig;

fn main() -> regretlab::Result<()> {
    let cfg = ExperimentConfig::default();
    let n_i = cfg.init.n_i;
    for policy in [ExplorationPolicy::Lazy, ExplorationPolicy::Immediate { beta: 0.3, n_i }] {
        let req = SingleRunRequest { controller: ControllerKind::Mv, policy, sigma_e2: 0.1, index: 0 };
        let (trace, _) = cmd_single_run(&cfg, &req)?;
        let cum = trace.cumulative_regret();
        let at = |t: usize| cum[t.min(cum.len()) - 1];
        println!(
            "{:>9}: R(10) = {:.4e}, R(100) = {:.4e}, R(1000) = {:.4e}, R(T) = {:.4e}",
            policy.name(),
            at(10),
            at(100),
            at(1000),
            at(trace.len())
        );
    }
    Ok(())
}
