//! Subcommand implementations. Each returns its report; printing and exit
//! codes are left to the binary.

use serde::Serialize;

use crate::adaptive_sim::{ArxSystem, ControlLaw, ExplorationPolicy, SimTrace, Simulation};
use crate::error::{Error, Result};
use crate::monte_carlo::{
    mvac_crossover, realization, sweep_lqac, sweep_mvac, LqacRow, MvacRow, Sweep, STREAM_LQAC_E, STREAM_LQAC_W,
    STREAM_MVAC_E,
};
use crate::regret_model::{classify_case, evaluate_schedule, solve_problem_one, Case};

use super::config::{ExperimentConfig, MatrixInput, ModelSpecFile, ScheduleFile};
use super::table::Table;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const MVAC_COLUMNS: [&str; 8] = [
    "sigma_e2",
    "regret_lazy",
    "stderr_lazy",
    "regret_immediate",
    "stderr_immediate",
    "beta_star",
    "diverged_lazy",
    "diverged_immediate",
];

pub const LQAC_COLUMNS: [&str; 9] = [
    "sigma_e2",
    "regret_decaying",
    "stderr_decaying",
    "alpha_star",
    "regret_immediate",
    "stderr_immediate",
    "beta_star",
    "diverged_decaying",
    "diverged_immediate",
];

pub const TRACE_COLUMNS: [&str; 6] = ["t", "y", "u", "w", "e", "cumulative_regret"];

#[derive(Debug, Clone, Serialize)]
pub struct TheoryReport {
    pub case: Case,
    pub c_t: Option<f64>,
    pub x1: MatrixInput,
    pub regret: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

pub fn cmd_theory(spec: &ModelSpecFile) -> Result<TheoryReport> {
    let spec = spec.to_spec()?;
    let sol = solve_problem_one(&spec)?;
    Ok(TheoryReport {
        case: sol.case,
        c_t: sol.c_t,
        x1: MatrixInput::from_psd(&sol.x1),
        regret: sol.regret,
        lower_bound: sol.lower_bound,
        upper_bound: sol.upper_bound,
        iterations: sol.iterations,
        gradient_norm: sol.gradient_norm,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelRegretReport {
    pub case: Case,
    pub schedule: &'static str,
    pub regret: f64,
    /// Set for decaying schedules: the constant that gave `regret`.
    pub alpha: Option<f64>,
    /// `(alpha, regret)` for every evaluated constant, when more than one.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub profile: Vec<(f64, f64)>,
}

pub fn cmd_model_regret(spec: &ModelSpecFile, schedule: &ScheduleFile) -> Result<ModelRegretReport> {
    let spec = spec.to_spec()?;
    let case = classify_case(&spec)?;
    let candidates = schedule.candidates(spec.dim(), spec.horizon())?;
    let mut best: Option<(Option<f64>, f64)> = None;
    let mut profile = Vec::new();
    for (alpha, sched) in &candidates {
        let r = match evaluate_schedule(&spec, sched) {
            Ok(r) => r,
            Err(Error::InfiniteRegret { .. }) if candidates.len() > 1 => f64::INFINITY,
            Err(e) => return Err(e),
        };
        if let (Some(a), true) = (alpha, candidates.len() > 1) {
            profile.push((*a, r));
        }
        if best.is_none_or(|(_, b)| r < b) {
            best = Some((*alpha, r));
        }
    }
    let (alpha, regret) = best.expect("at least one candidate");
    Ok(ModelRegretReport { case, schedule: schedule.kind(), regret, alpha, profile })
}

fn metadata(table: &mut Table, command: &str, cfg: &ExperimentConfig) {
    table.push_meta(format!("regretlab {VERSION}"));
    table.push_meta(format!("command: {command}"));
    table.push_meta(format!("config: {}", cfg.to_json_line()));
}

fn checksum_meta(table: &mut Table, checksums: &[(u64, u64)]) {
    for (stream, sum) in checksums {
        table.push_meta(format!("noise stream {stream}: checksum {sum:016x}"));
    }
}

pub fn mvac_table(cfg: &ExperimentConfig, sweep: &Sweep<MvacRow>) -> Table {
    let mut table = Table::new(&MVAC_COLUMNS);
    metadata(&mut table, "mvac-sweep", cfg);
    checksum_meta(&mut table, &sweep.bank_checksums);
    for r in &sweep.rows {
        table.push_row(vec![
            r.sigma_e2,
            r.lazy.mean,
            r.lazy.stderr,
            r.immediate.mean,
            r.immediate.stderr,
            r.beta_star,
            r.lazy.diverged as f64,
            r.immediate.diverged as f64,
        ]);
    }
    table
}

pub fn lqac_table(cfg: &ExperimentConfig, sweep: &Sweep<LqacRow>) -> Table {
    let mut table = Table::new(&LQAC_COLUMNS);
    metadata(&mut table, "lqac-sweep", cfg);
    checksum_meta(&mut table, &sweep.bank_checksums);
    for r in &sweep.rows {
        table.push_row(vec![
            r.sigma_e2,
            r.decaying.mean,
            r.decaying.stderr,
            r.alpha_star,
            r.immediate.mean,
            r.immediate.stderr,
            r.beta_star,
            r.decaying.diverged as f64,
            r.immediate.diverged as f64,
        ]);
    }
    table
}

pub struct MvacReport {
    pub sweep: Sweep<MvacRow>,
    pub crossover: Option<f64>,
    pub table: Table,
}

pub fn cmd_mvac_sweep(cfg: &ExperimentConfig) -> Result<MvacReport> {
    let sweep = sweep_mvac(&cfg.sweep_config()?)?;
    let crossover = mvac_crossover(&sweep.rows);
    let table = mvac_table(cfg, &sweep);
    Ok(MvacReport { sweep, crossover, table })
}

pub struct LqacReport {
    pub sweep: Sweep<LqacRow>,
    /// Grid points where the best pulse is no worse than the best decaying
    /// schedule.
    pub immediate_wins: usize,
    pub table: Table,
}

pub fn cmd_lqac_sweep(cfg: &ExperimentConfig) -> Result<LqacReport> {
    let sweep = sweep_lqac(&cfg.sweep_config()?)?;
    let immediate_wins = sweep.rows.iter().filter(|r| r.immediate.mean <= r.decaying.mean).count();
    let table = lqac_table(cfg, &sweep);
    Ok(LqacReport { sweep, immediate_wins, table })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Mv,
    Lq,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleRunRequest {
    pub controller: ControllerKind,
    pub policy: ExplorationPolicy,
    pub sigma_e2: f64,
    pub index: usize,
}

/// One realization traced step by step. Realization `index` is the same one
/// the matching sweep uses.
pub fn cmd_single_run(cfg: &ExperimentConfig, req: &SingleRunRequest) -> Result<(SimTrace, Table)> {
    let system =
        ArxSystem::new(cfg.system.a0, cfg.system.b0, req.sigma_e2).map_err(|e| Error::Config(e.to_string()))?;
    req.policy.validate().map_err(|e| Error::Config(e.to_string()))?;
    if cfg.horizon == 0 {
        return Err(Error::Config("horizon must be positive".into()));
    }
    let (law, e_stream, reps) = match req.controller {
        ControllerKind::Mv => (ControlLaw::MinimumVariance, STREAM_MVAC_E, cfg.mc_reps_mvac),
        ControllerKind::Lq => {
            (ControlLaw::LinearQuadratic { q: cfg.lq_weights.q, r: cfg.lq_weights.r }, STREAM_LQAC_E, cfg.mc_reps_lqac)
        }
    };
    if req.index >= reps {
        return Err(Error::Config(format!("realization index {} out of range (M = {reps})", req.index)));
    }
    let sim = Simulation::new(system, law, req.policy, cfg.prior()?).map_err(|e| Error::Config(e.to_string()))?;
    let e = realization(cfg.seed, e_stream, req.index, cfg.horizon);
    let w = matches!(req.policy, ExplorationPolicy::Decaying { .. })
        .then(|| realization(cfg.seed, STREAM_LQAC_W, req.index, cfg.horizon));
    let (trace, outcome) = sim.trace(&e, w.as_deref())?;

    let mut table = Table::new(&TRACE_COLUMNS);
    metadata(&mut table, "single-run", cfg);
    table.push_meta(format!(
        "controller: {:?}, policy: {}, sigma_e2: {}, index: {}, diverged: {}",
        req.controller,
        serde_json::to_string(&req.policy).expect("policy serializes"),
        req.sigma_e2,
        req.index,
        outcome.diverged
    ));
    let cumulative = trace.cumulative_regret();
    for (k, cum) in cumulative.iter().enumerate() {
        table.push_row(vec![(k + 1) as f64, trace.y[k], trace.u[k], trace.w[k], trace.e[k], *cum]);
    }
    Ok((trace, table))
}
