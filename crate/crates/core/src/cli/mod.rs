//! Command-line front end: argument parsing, dispatch and exit codes.

pub mod commands;
pub mod config;
pub mod table;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::adaptive_sim::ExplorationPolicy;
use crate::error::{Error, Result};
use crate::monte_carlo::with_threads;

use commands::{ControllerKind, SingleRunRequest};
use config::{ExperimentConfig, ModelSpecFile, ScheduleFile};
use table::Table;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;
pub const EXIT_ALL_DIVERGED: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonConvergence { .. } => EXIT_NON_CONVERGENCE,
        Error::AllDiverged { .. } => EXIT_ALL_DIVERGED,
        _ => EXIT_CONFIG,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "regretlab",
    version,
    about = "Finite-horizon exploration design and adaptive-control regret experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Input file (model spec for theory commands, experiment config otherwise).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Full-scale horizon, realization counts and grid sizes.
    #[arg(long, global = true)]
    pub paper_scale: bool,
    /// Winsorize per-realization regrets at this percentile before averaging.
    #[arg(long, global = true)]
    pub winsorize: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the exploration-design problem for a model spec.
    Theory,
    /// Evaluate a given excitation schedule under the regret model.
    ModelRegret {
        #[arg(long)]
        schedule: PathBuf,
    },
    /// Lazy versus best immediate exploration under MV control.
    MvacSweep,
    /// Best decaying versus best immediate exploration under LQ control.
    LqacSweep,
    /// Step-by-step trace of one realization.
    SingleRun {
        #[arg(long, value_enum, default_value_t = PolicyArg::Lazy)]
        policy: PolicyArg,
        #[arg(long, value_enum, default_value_t = ControllerArg::Mv)]
        controller: ControllerArg,
        #[arg(long)]
        sigma_e2: f64,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Lazy,
    Immediate,
    Decaying,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ControllerArg {
    Mv,
    Lq,
}

fn require_config(cli: &Cli) -> Result<&Path> {
    cli.config.as_deref().ok_or_else(|| Error::Config("--config <path> is required".into()))
}

fn experiment_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if cli.paper_scale {
        cfg.apply_full_scale();
    }
    if cli.winsorize.is_some() {
        cfg.winsorize_pct = cli.winsorize;
    }
    cfg.apply_seed_env()?;
    Ok(cfg)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// JSON reports always go to stdout, and also to `--out` when given.
fn emit_json(json: &str, out: Option<&Path>) -> Result<()> {
    let text = format!("{json}\n");
    emit(&text, None)?;
    if out.is_some() {
        emit(&text, out)?;
    }
    Ok(())
}

fn emit_table(table: &Table, cli_out: Option<&Path>, cfg: &ExperimentConfig) -> Result<()> {
    emit(&table.to_string_csv(), cli_out.or(cfg.output.as_deref()))
}

/// Runs one parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    with_threads(cli.threads, || dispatch(cli))?
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Theory => {
            let spec = ModelSpecFile::load(require_config(cli)?)?;
            let report = commands::cmd_theory(&spec)?;
            emit_json(&serde_json::to_string_pretty(&report)?, cli.out.as_deref())?;
        }
        Command::ModelRegret { schedule } => {
            let spec = ModelSpecFile::load(require_config(cli)?)?;
            let schedule = ScheduleFile::load(schedule)?;
            let report = commands::cmd_model_regret(&spec, &schedule)?;
            emit_json(&serde_json::to_string_pretty(&report)?, cli.out.as_deref())?;
        }
        Command::MvacSweep => {
            let cfg = experiment_config(cli)?;
            let report = commands::cmd_mvac_sweep(&cfg)?;
            emit_table(&report.table, cli.out.as_deref(), &cfg)?;
            match report.crossover {
                Some(s) => eprintln!("crossover: immediate beats lazy from sigma_e2 = {}", table::format_g(s)),
                None => eprintln!("crossover: none on this grid"),
            }
        }
        Command::LqacSweep => {
            let cfg = experiment_config(cli)?;
            let report = commands::cmd_lqac_sweep(&cfg)?;
            emit_table(&report.table, cli.out.as_deref(), &cfg)?;
            eprintln!("immediate <= decaying at {}/{} grid points", report.immediate_wins, report.sweep.rows.len());
        }
        Command::SingleRun { policy, controller, sigma_e2, index, beta, alpha } => {
            let cfg = experiment_config(cli)?;
            let n_i = cfg.init.n_i;
            let policy = match policy {
                PolicyArg::Lazy => ExplorationPolicy::Lazy,
                PolicyArg::Immediate => ExplorationPolicy::Immediate { beta: *beta, n_i },
                PolicyArg::Decaying => ExplorationPolicy::Decaying { alpha: *alpha, n_i },
            };
            let controller = match controller {
                ControllerArg::Mv => ControllerKind::Mv,
                ControllerArg::Lq => ControllerKind::Lq,
            };
            let req = SingleRunRequest { controller, policy, sigma_e2: *sigma_e2, index: *index };
            let (_, table) = commands::cmd_single_run(&cfg, &req)?;
            emit_table(&table, cli.out.as_deref(), &cfg)?;
        }
    }
    Ok(())
}
