//! Monte Carlo regret estimation with common random numbers.
//!
//! Realization `i` of stream `s` is drawn from a ChaCha8 generator keyed by
//! the run seed with stream number `(s << 32) | i`, so it depends only on
//! `(seed, s, i)`. Averages are formed from results collected in index order
//! and summed pairwise, which keeps every number independent of the thread
//! count.

use std::borrow::Cow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive_sim::{ArxSystem, ControlLaw, ExplorationPolicy, RlsState, RunOutcome, Simulation};
use crate::error::{Error, Result};

/// Banks with at most this many samples are generated up front.
pub const MATERIALIZE_LIMIT: usize = 1 << 24;

pub const STREAM_MVAC_E: u64 = 0;
pub const STREAM_LQAC_E: u64 = 1;
pub const STREAM_LQAC_W: u64 = 2;

/// `M` unit-variance Gaussian realizations of length `T`.
#[derive(Debug, Clone)]
pub struct NoiseBank {
    seed: u64,
    stream: u64,
    count: usize,
    horizon: usize,
    stored: Option<Vec<Vec<f64>>>,
}

/// Draws realization `index` of `stream`.
pub fn realization(seed: u64, stream: u64, index: usize, horizon: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream << 32) | index as u64);
    (0..horizon).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn make_noise_bank(seed: u64, stream: u64, count: usize, horizon: usize) -> Result<NoiseBank> {
    NoiseBank::new(seed, stream, count, horizon, count.saturating_mul(horizon) <= MATERIALIZE_LIMIT)
}

impl NoiseBank {
    /// With `materialize = false` each realization is regenerated on use.
    pub fn new(seed: u64, stream: u64, count: usize, horizon: usize, materialize: bool) -> Result<Self> {
        if count == 0 || horizon == 0 {
            return Err(Error::Config(format!("noise bank needs M >= 1 and T >= 1, got M = {count}, T = {horizon}")));
        }
        if stream >= 1 << 32 || count as u64 >= 1 << 32 {
            return Err(Error::Config("noise bank stream or size out of range".into()));
        }
        let stored =
            materialize.then(|| (0..count).into_par_iter().map(|i| realization(seed, stream, i, horizon)).collect());
        Ok(Self { seed, stream, count, horizon, stored })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn is_materialized(&self) -> bool {
        self.stored.is_some()
    }

    pub fn get(&self, index: usize) -> Cow<'_, [f64]> {
        assert!(index < self.count, "realization {index} out of range (M = {})", self.count);
        match &self.stored {
            Some(all) => Cow::Borrowed(&all[index]),
            None => Cow::Owned(realization(self.seed, self.stream, index, self.horizon)),
        }
    }

    /// FNV-1a over the bits of every sample, in index order.
    pub fn checksum(&self) -> u64 {
        let per: Vec<u64> = (0..self.count).into_par_iter().map(|i| fnv1a(&self.get(i))).collect();
        per.iter().fold(0xcbf2_9ce4_8422_2325, |h, v| fnv_mix(h, *v))
    }
}

fn fnv_mix(mut h: u64, v: u64) -> u64 {
    for byte in v.to_le_bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn fnv1a(xs: &[f64]) -> u64 {
    xs.iter().fold(0xcbf2_9ce4_8422_2325, |h, x| fnv_mix(h, x.to_bits()))
}

/// Logarithmically spaced values from `min` to `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        let grid = Self { min, max, count };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("grid is empty (count = 0)".into()));
        }
        if !(self.min > 0.0 && self.min.is_finite() && self.max.is_finite() && self.max >= self.min) {
            return Err(Error::Config(format!(
                "log grid needs 0 < min <= max, got min = {}, max = {}",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let (lo, hi) = (self.min.ln(), self.max.ln());
        let last = self.count - 1;
        (0..self.count)
            .map(|k| match k {
                0 => self.min,
                k if k == last => self.max,
                k => (lo + (hi - lo) * k as f64 / last as f64).exp(),
            })
            .collect()
    }
}

/// Pairwise (cascade) sum, fixed by the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct McOptions {
    /// Drop diverged realizations instead of counting them at the clip value.
    pub exclude_diverged: bool,
    /// Clamp samples to the `[p, 100 - p]` percentile range before averaging.
    pub winsorize_pct: Option<f64>,
    /// Refine the grid optimum by golden-section search in log space.
    pub refine: bool,
}

impl McOptions {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.winsorize_pct {
            if !(0.0..50.0).contains(&p) {
                return Err(Error::Config(format!("winsorize percentage must be in [0, 50), got {p}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Realizations averaged.
    pub used: usize,
    pub diverged: usize,
    pub ill_conditioned: usize,
}

fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let pos = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Aggregates per-realization outcomes given in index order.
pub fn summarize(outcomes: &[RunOutcome], opts: &McOptions) -> Result<RegretEstimate> {
    let diverged = outcomes.iter().filter(|o| o.diverged).count();
    let ill_conditioned = outcomes.iter().filter(|o| o.ill_conditioned).count();
    let mut values: Vec<f64> =
        outcomes.iter().filter(|o| !(opts.exclude_diverged && o.diverged)).map(|o| o.regret).collect();
    if values.is_empty() {
        return Err(Error::AllDiverged { count: outcomes.len() });
    }
    if let Some(p) = opts.winsorize_pct.filter(|&p| p > 0.0) {
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = (percentile(&sorted, p), percentile(&sorted, 100.0 - p));
        for v in &mut values {
            *v = v.clamp(lo, hi);
        }
    }
    let n = values.len() as f64;
    let mean = pairwise_sum(&values) / n;
    let squares: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let stderr = if values.len() > 1 { (pairwise_sum(&squares) / (n - 1.0) / n).sqrt() } else { 0.0 };
    Ok(RegretEstimate { mean, stderr, used: values.len(), diverged, ill_conditioned })
}

fn check_banks(bank_e: &NoiseBank, bank_w: Option<&NoiseBank>) -> Result<()> {
    if let Some(w) = bank_w {
        if w.count() != bank_e.count() || w.horizon() != bank_e.horizon() {
            return Err(Error::Config("e and w banks differ in size".into()));
        }
        if w.seed() == bank_e.seed() && w.stream() == bank_e.stream() {
            return Err(Error::Config("e and w banks share a stream".into()));
        }
    }
    Ok(())
}

fn run_indexed(sim: &Simulation, bank_e: &NoiseBank, bank_w: Option<&NoiseBank>, i: usize) -> Result<RunOutcome> {
    let e = bank_e.get(i);
    let w = bank_w.map(|b| b.get(i));
    sim.run(&e, w.as_deref())
}

/// Mean regret over every realization of the bank, `e = sigma_e * e_bar_i`.
pub fn estimate_regret(
    sim: &Simulation,
    bank_e: &NoiseBank,
    bank_w: Option<&NoiseBank>,
    opts: &McOptions,
) -> Result<RegretEstimate> {
    check_banks(bank_e, bank_w)?;
    let outcomes: Vec<RunOutcome> =
        (0..bank_e.count()).into_par_iter().map(|i| run_indexed(sim, bank_e, bank_w, i)).collect::<Result<_>>()?;
    summarize(&outcomes, opts)
}

/// Everything about an adaptive experiment except the exploration policy.
#[derive(Debug, Clone, Copy)]
pub struct Experiment {
    pub system: ArxSystem,
    pub law: ControlLaw,
    pub prior: RlsState,
    pub n_i: usize,
    pub options: McOptions,
}

impl Experiment {
    pub fn simulation(&self, policy: ExplorationPolicy) -> Result<Simulation> {
        Simulation::new(self.system, self.law, policy, self.prior)
    }

    pub fn estimate(
        &self,
        policy: ExplorationPolicy,
        bank_e: &NoiseBank,
        bank_w: Option<&NoiseBank>,
    ) -> Result<RegretEstimate> {
        estimate_regret(&self.simulation(policy)?, bank_e, bank_w, &self.options)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptimum {
    /// Best level (`beta` or `alpha`).
    pub level: f64,
    pub estimate: RegretEstimate,
    /// One entry per grid value; `None` where every realization was excluded.
    pub profile: Vec<Option<RegretEstimate>>,
}

fn grid_search(
    exp: &Experiment,
    make_policy: impl Fn(f64) -> ExplorationPolicy + Sync,
    bank_e: &NoiseBank,
    bank_w: Option<&NoiseBank>,
    grid: &[f64],
) -> Result<GridOptimum> {
    if grid.is_empty() {
        return Err(Error::Config("exploration grid is empty".into()));
    }
    check_banks(bank_e, bank_w)?;
    let sims: Vec<Simulation> = grid.iter().map(|&v| exp.simulation(make_policy(v))).collect::<Result<_>>()?;
    let m = bank_e.count();
    // realization-major so a regenerated realization serves the whole grid
    let outcomes: Vec<Vec<RunOutcome>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let e = bank_e.get(i);
            let w = bank_w.map(|b| b.get(i));
            sims.iter().map(|sim| sim.run(&e, w.as_deref())).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut profile = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, RegretEstimate)> = None;
    for (g, &level) in grid.iter().enumerate() {
        let column: Vec<RunOutcome> = outcomes.iter().map(|row| row[g]).collect();
        let est = match summarize(&column, &exp.options) {
            Ok(est) => Some(est),
            Err(Error::AllDiverged { .. }) => None,
            Err(e) => return Err(e),
        };
        if let Some(est) = est {
            // strict comparison keeps the smaller level on ties
            if best.as_ref().is_none_or(|(_, b)| est.mean < b.mean) {
                best = Some((level, est));
            }
        }
        profile.push(est);
    }
    let (mut level, mut estimate) = best.ok_or(Error::AllDiverged { count: m * grid.len() })?;

    if exp.options.refine && grid.len() > 1 {
        let k = grid.iter().position(|&v| v == level).unwrap_or(0);
        let lo = grid[k.saturating_sub(1)];
        let hi = grid[(k + 1).min(grid.len() - 1)];
        let eval = |v: f64| -> Result<Option<RegretEstimate>> {
            match exp.estimate(make_policy(v), bank_e, bank_w) {
                Ok(est) => Ok(Some(est)),
                Err(Error::AllDiverged { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        };
        if let Some((v, est)) = golden_section_log(lo, hi, eval)? {
            if est.mean < estimate.mean {
                level = v;
                estimate = est;
            }
        }
    }
    Ok(GridOptimum { level, estimate, profile })
}

fn golden_section_log(
    lo: f64,
    hi: f64,
    eval: impl Fn(f64) -> Result<Option<RegretEstimate>>,
) -> Result<Option<(f64, RegretEstimate)>> {
    const STEPS: usize = 16;
    if !(hi > lo) {
        return Ok(None);
    }
    let score = |v: f64| -> Result<(f64, Option<RegretEstimate>)> {
        let est = eval(v)?;
        Ok((est.map_or(f64::INFINITY, |e| e.mean), est))
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut ec) = score(c.exp())?;
    let (mut fd, mut ed) = score(d.exp())?;
    for _ in 0..STEPS {
        if fc <= fd {
            b = d;
            (d, fd, ed) = (c, fc, ec);
            c = b - inv_phi * (b - a);
            (fc, ec) = score(c.exp())?;
        } else {
            a = c;
            (c, fc, ec) = (d, fd, ed);
            d = a + inv_phi * (b - a);
            (fd, ed) = score(d.exp())?;
        }
    }
    Ok(if fc <= fd { ec.map(|e| (c.exp(), e)) } else { ed.map(|e| (d.exp(), e)) })
}

/// Best pulse height over `beta_grid` (ties go to the smaller value).
pub fn optimize_pulse(exp: &Experiment, bank_e: &NoiseBank, beta_grid: &[f64]) -> Result<GridOptimum> {
    let n_i = exp.n_i;
    grid_search(exp, |beta| ExplorationPolicy::Immediate { beta, n_i }, bank_e, None, beta_grid)
}

/// Best decay constant over `alpha_grid`, with the paired `w` bank.
pub fn optimize_decay(
    exp: &Experiment,
    bank_e: &NoiseBank,
    bank_w: &NoiseBank,
    alpha_grid: &[f64],
) -> Result<GridOptimum> {
    let n_i = exp.n_i;
    grid_search(exp, |alpha| ExplorationPolicy::Decaying { alpha, n_i }, bank_e, Some(bank_w), alpha_grid)
}

/// Parameters of a `sigma_e^2` sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub a0: f64,
    pub b0: f64,
    pub horizon: usize,
    pub sigma_grid: Grid,
    pub beta_grid: Grid,
    pub alpha_grid: Grid,
    pub reps_mvac: usize,
    pub reps_lqac: usize,
    pub seed: u64,
    pub prior: RlsState,
    pub n_i: usize,
    pub q: f64,
    pub r: f64,
    pub options: McOptions,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.sigma_grid.validate()?;
        self.beta_grid.validate()?;
        self.alpha_grid.validate()?;
        self.options.validate()?;
        if self.horizon < self.n_i + 1 {
            return Err(Error::Config(format!("T = {} must be at least n_i + 1 = {}", self.horizon, self.n_i + 1)));
        }
        if self.reps_mvac == 0 || self.reps_lqac == 0 {
            return Err(Error::Config("realization counts must be positive".into()));
        }
        if !(self.q > 0.0 && self.r >= 0.0) {
            return Err(Error::Config(format!("need q > 0 and r >= 0, got q = {}, r = {}", self.q, self.r)));
        }
        ArxSystem::new(self.a0, self.b0, 0.0).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    fn experiment(&self, sigma_e2: f64, law: ControlLaw) -> Result<Experiment> {
        Ok(Experiment {
            system: ArxSystem::new(self.a0, self.b0, sigma_e2)?,
            law,
            prior: self.prior,
            n_i: self.n_i,
            options: self.options,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvacRow {
    pub sigma_e2: f64,
    pub lazy: RegretEstimate,
    pub immediate: RegretEstimate,
    pub beta_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqacRow {
    pub sigma_e2: f64,
    pub decaying: RegretEstimate,
    pub alpha_star: f64,
    pub immediate: RegretEstimate,
    pub beta_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep<R> {
    pub rows: Vec<R>,
    /// `(stream, checksum)` of each bank consumed.
    pub bank_checksums: Vec<(u64, u64)>,
}

/// Lazy versus best pulse for each `sigma_e^2`, all on one `e` bank.
pub fn sweep_mvac(cfg: &SweepConfig) -> Result<Sweep<MvacRow>> {
    cfg.validate()?;
    let bank = make_noise_bank(cfg.seed, STREAM_MVAC_E, cfg.reps_mvac, cfg.horizon)?;
    let checksum = bank.checksum();
    log::info!("mvac bank: M = {}, T = {}, checksum {checksum:016x}", bank.count(), bank.horizon());
    let betas = cfg.beta_grid.values();
    let mut rows = Vec::with_capacity(cfg.sigma_grid.count);
    for sigma_e2 in cfg.sigma_grid.values() {
        let exp = cfg.experiment(sigma_e2, ControlLaw::MinimumVariance)?;
        let lazy = exp.estimate(ExplorationPolicy::Lazy, &bank, None)?;
        let best = optimize_pulse(&exp, &bank, &betas)?;
        log::debug!(
            "sigma_e2 = {sigma_e2:e}: lazy {:e}, immediate {:e} at beta {:e}",
            lazy.mean,
            best.estimate.mean,
            best.level
        );
        rows.push(MvacRow { sigma_e2, lazy, immediate: best.estimate, beta_star: best.level });
    }
    Ok(Sweep { rows, bank_checksums: vec![(STREAM_MVAC_E, checksum)] })
}

/// Best decaying versus best pulse for each `sigma_e^2`.
pub fn sweep_lqac(cfg: &SweepConfig) -> Result<Sweep<LqacRow>> {
    cfg.validate()?;
    let bank_e = make_noise_bank(cfg.seed, STREAM_LQAC_E, cfg.reps_lqac, cfg.horizon)?;
    let bank_w = make_noise_bank(cfg.seed, STREAM_LQAC_W, cfg.reps_lqac, cfg.horizon)?;
    let checksums = vec![(STREAM_LQAC_E, bank_e.checksum()), (STREAM_LQAC_W, bank_w.checksum())];
    log::info!("lqac banks: M = {}, T = {}, checksums {checksums:x?}", bank_e.count(), bank_e.horizon());
    let (alphas, betas) = (cfg.alpha_grid.values(), cfg.beta_grid.values());
    let mut rows = Vec::with_capacity(cfg.sigma_grid.count);
    for sigma_e2 in cfg.sigma_grid.values() {
        let exp = cfg.experiment(sigma_e2, ControlLaw::LinearQuadratic { q: cfg.q, r: cfg.r })?;
        let decaying = optimize_decay(&exp, &bank_e, &bank_w, &alphas)?;
        let immediate = optimize_pulse(&exp, &bank_e, &betas)?;
        rows.push(LqacRow {
            sigma_e2,
            decaying: decaying.estimate,
            alpha_star: decaying.level,
            immediate: immediate.estimate,
            beta_star: immediate.level,
        });
    }
    Ok(Sweep { rows, bank_checksums: checksums })
}

/// Smallest `sigma_e^2` at which the pulse beats lazy exploration.
pub fn mvac_crossover(rows: &[MvacRow]) -> Option<f64> {
    rows.iter().find(|r| r.immediate.mean < r.lazy.mean).map(|r| r.sigma_e2)
}

/// Runs `f` on a pool of `threads` workers (`0` = rayon's default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}
