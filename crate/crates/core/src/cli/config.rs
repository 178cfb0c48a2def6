//! JSON inputs: experiment configuration, model specs and schedules.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaptive_sim::RlsState;
use crate::error::{Error, Result};
use crate::linalg::{PsdMatrix, SymMatrix};
use crate::monte_carlo::{Grid, McOptions, SweepConfig};
use crate::regret_model::{ExcitationSchedule, RegretModelSpec};

pub const DESK_HORIZON: usize = 10_000;
pub const DESK_REPS_MVAC: usize = 200;
pub const DESK_REPS_LQAC: usize = 50;
pub const DESK_GRID_POINTS: usize = 20;

pub const FULL_HORIZON: usize = 100_000;
pub const FULL_REPS_MVAC: usize = 1000;
pub const FULL_REPS_LQAC: usize = 100;
pub const FULL_GRID_POINTS: usize = 100;

pub const DEFAULT_SEED: u64 = 2024;
pub const SEED_ENV: &str = "REGRETLAB_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub a0: f64,
    pub b0: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { a0: -0.45, b0: 0.67 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    pub p_init_scale: f64,
    pub a_init: f64,
    pub b_init: f64,
    pub n_i: usize,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { p_init_scale: 1e3, a_init: -0.3, b_init: 0.8, n_i: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqWeights {
    pub q: f64,
    pub r: f64,
}

impl Default for LqWeights {
    fn default() -> Self {
        Self { q: 1.0, r: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergencePolicy {
    /// Diverged realizations count at the clip value.
    #[default]
    Include,
    Exclude,
}

fn desk_grid() -> Grid {
    Grid { min: 1e-5, max: 1.0, count: DESK_GRID_POINTS }
}

/// Experiment configuration. Missing fields take the standard constants,
/// except the scale fields (horizon, realization counts, grid sizes) which
/// default to desk scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub horizon: usize,
    pub sigma_grid: Grid,
    pub beta_grid: Grid,
    pub alpha_grid: Grid,
    pub mc_reps_mvac: usize,
    pub mc_reps_lqac: usize,
    pub seed: u64,
    pub init: InitConfig,
    pub lq_weights: LqWeights,
    pub divergence: DivergencePolicy,
    pub winsorize_pct: Option<f64>,
    pub refine: bool,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            horizon: DESK_HORIZON,
            sigma_grid: desk_grid(),
            beta_grid: desk_grid(),
            alpha_grid: desk_grid(),
            mc_reps_mvac: DESK_REPS_MVAC,
            mc_reps_lqac: DESK_REPS_LQAC,
            seed: DEFAULT_SEED,
            init: InitConfig::default(),
            lq_weights: LqWeights::default(),
            divergence: DivergencePolicy::Include,
            winsorize_pct: None,
            refine: false,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Horizon, realization counts and grid sizes of the full-scale runs.
    pub fn apply_full_scale(&mut self) {
        self.horizon = FULL_HORIZON;
        self.mc_reps_mvac = FULL_REPS_MVAC;
        self.mc_reps_lqac = FULL_REPS_LQAC;
        self.sigma_grid.count = FULL_GRID_POINTS;
        self.beta_grid.count = FULL_GRID_POINTS;
        self.alpha_grid.count = FULL_GRID_POINTS;
    }

    /// Replaces the seed with `REGRETLAB_SEED` when that is set.
    pub fn apply_seed_env(&mut self) -> Result<()> {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            self.seed = raw
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={raw:?} is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn prior(&self) -> Result<RlsState> {
        let init = &self.init;
        if !(init.p_init_scale >= 0.0 && init.p_init_scale.is_finite()) {
            return Err(Error::Config(format!("init.p_init_scale must be >= 0, got {}", init.p_init_scale)));
        }
        RlsState::with_prior(init.a_init, init.b_init, init.p_init_scale).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn mc_options(&self) -> McOptions {
        McOptions {
            exclude_diverged: self.divergence == DivergencePolicy::Exclude,
            winsorize_pct: self.winsorize_pct,
            refine: self.refine,
        }
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let named = |name: &str, g: &Grid| g.validate().map_err(|e| Error::Config(format!("{name}: {e}")));
        named("sigma_grid", &self.sigma_grid)?;
        named("beta_grid", &self.beta_grid)?;
        named("alpha_grid", &self.alpha_grid)?;
        if self.init.n_i < 2 {
            return Err(Error::Config(format!("init.n_i must be >= 2, got {}", self.init.n_i)));
        }
        let cfg = SweepConfig {
            a0: self.system.a0,
            b0: self.system.b0,
            horizon: self.horizon,
            sigma_grid: self.sigma_grid,
            beta_grid: self.beta_grid,
            alpha_grid: self.alpha_grid,
            reps_mvac: self.mc_reps_mvac,
            reps_lqac: self.mc_reps_lqac,
            seed: self.seed,
            prior: self.prior()?,
            n_i: self.init.n_i,
            q: self.lq_weights.q,
            r: self.lq_weights.r,
            options: self.mc_options(),
        };
        cfg.validate().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })?;
        Ok(cfg)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// A matrix given either as a number (a `1 x 1` matrix) or as rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixInput {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

impl MatrixInput {
    pub fn to_psd(&self, name: &str) -> Result<PsdMatrix> {
        let rows = match self {
            MatrixInput::Scalar(v) => vec![vec![*v]],
            MatrixInput::Rows(rows) => rows.clone(),
        };
        let sym = SymMatrix::from_rows(&rows).map_err(|e| Error::Config(format!("{name}: {e}")))?;
        PsdMatrix::new(sym).map_err(|e| Error::Config(format!("{name}: {e}")))
    }

    pub fn from_psd(m: &PsdMatrix) -> Self {
        if m.dim() == 1 {
            MatrixInput::Scalar(m.as_matrix()[(0, 0)])
        } else {
            MatrixInput::Rows(m.sym().to_rows())
        }
    }
}

/// `{"W": .., "Z": .., "S": .., "T": ..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpecFile {
    #[serde(rename = "W")]
    pub w: MatrixInput,
    #[serde(rename = "Z")]
    pub z: MatrixInput,
    #[serde(rename = "S")]
    pub s: MatrixInput,
    #[serde(rename = "T")]
    pub horizon: usize,
}

impl ModelSpecFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("model spec: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_spec(&self) -> Result<RegretModelSpec> {
        RegretModelSpec::new(self.w.to_psd("W")?, self.z.to_psd("Z")?, self.s.to_psd("S")?, self.horizon)
            .map_err(|e| Error::Config(e.to_string()))
    }
}

/// Excitation schedule for `model-regret`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleFile {
    /// No excitation.
    Zero,
    /// `x1` at `t = 1`.
    Pulse { x1: MatrixInput },
    /// `L_t = (alpha / sqrt t) shape`, shape defaulting to the identity.
    /// With `alpha_grid` the best grid value is reported.
    Decaying {
        #[serde(default)]
        alpha: Option<f64>,
        #[serde(default)]
        alpha_grid: Option<Grid>,
        #[serde(default)]
        shape: Option<MatrixInput>,
    },
    /// Every increment spelled out; must have `T` entries.
    Steps { steps: Vec<MatrixInput> },
}

impl ScheduleFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("schedule: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ScheduleFile::Zero => "zero",
            ScheduleFile::Pulse { .. } => "pulse",
            ScheduleFile::Decaying { .. } => "decaying",
            ScheduleFile::Steps { .. } => "steps",
        }
    }

    /// Candidate schedules with their decay constants (if any).
    pub fn candidates(&self, dim: usize, horizon: usize) -> Result<Vec<(Option<f64>, ExcitationSchedule)>> {
        let check_dim = |m: &PsdMatrix, what: &str| {
            if m.dim() == dim {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} is {}x{0}, spec is {dim}x{dim}", m.dim())))
            }
        };
        match self {
            ScheduleFile::Zero => Ok(vec![(None, ExcitationSchedule::zeros(dim, horizon))]),
            ScheduleFile::Pulse { x1 } => {
                let x1 = x1.to_psd("x1")?;
                check_dim(&x1, "x1")?;
                Ok(vec![(None, ExcitationSchedule::pulse(x1, horizon))])
            }
            ScheduleFile::Decaying { alpha, alpha_grid, shape } => {
                let shape = match shape {
                    Some(m) => m.to_psd("shape")?,
                    None => PsdMatrix::identity(dim),
                };
                check_dim(&shape, "shape")?;
                let alphas = match (alpha, alpha_grid) {
                    (Some(a), None) if *a >= 0.0 => vec![*a],
                    (None, Some(g)) => {
                        g.validate().map_err(|e| Error::Config(format!("alpha_grid: {e}")))?;
                        g.values()
                    }
                    _ => {
                        return Err(Error::Config(
                            "decaying schedule needs exactly one of alpha >= 0 or alpha_grid".into(),
                        ))
                    }
                };
                Ok(alphas.into_iter().map(|a| (Some(a), ExcitationSchedule::decaying(a, &shape, horizon))).collect())
            }
            ScheduleFile::Steps { steps } => {
                if steps.len() != horizon {
                    return Err(Error::Config(format!("schedule has {} steps, T = {horizon}", steps.len())));
                }
                let mats = steps
                    .iter()
                    .enumerate()
                    .map(|(k, m)| {
                        let m = m.to_psd(&format!("steps[{k}]"))?;
                        check_dim(&m, &format!("steps[{k}]"))?;
                        Ok(m)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(vec![(None, ExcitationSchedule::new(mats)?)])
            }
        }
    }
}
