//! Time-domain simulation of the first-order ARX plant
//!
//! ```text
//! y(t) = -a0 y(t-1) + b0 u(t-1) + e(t),    y(0) = u(0) = 0
//! ```
//!
//! under certainty-equivalence minimum-variance (MV) or linear-quadratic (LQ)
//! control, with the parameters `(a, b)` learned by recursive least squares.
//!
//! Per step `t` the simulator observes `y(t)`, updates the estimate with the
//! regressor `phi(t) = [-y(t-1), u(t-1)]`, refreshes the controller and then
//! applies `u(t) = -K y(t) + w(t)`.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_scalar_dare, PsdMatrix, SymMatrix};

/// Estimates with `|b_hat|` below this are not used to build a controller.
pub const B_FLOOR: f64 = 1e-6;
/// A realization is stopped once `|y|` exceeds this.
pub const DIVERGENCE_LIMIT: f64 = 1e12;
/// Regret charged to a diverged realization.
pub const DIVERGED_REGRET: f64 = 1e12;
/// Condition-number limit of the open-loop least-squares fit.
pub const FIT_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArxSystem {
    a0: f64,
    b0: f64,
    sigma_e2: f64,
    kappa: f64,
}

impl ArxSystem {
    /// `sigma_e2 = 0` is accepted and gives a noise-free plant.
    pub fn new(a0: f64, b0: f64, sigma_e2: f64) -> Result<Self> {
        if !(a0.abs() < 1.0) {
            return Err(Error::InvalidSimulation(format!("need |a0| < 1, got {a0}")));
        }
        if !(b0 != 0.0 && b0.is_finite()) {
            return Err(Error::InvalidSimulation(format!("need b0 != 0, got {b0}")));
        }
        if !(sigma_e2 >= 0.0 && sigma_e2.is_finite()) {
            return Err(Error::InvalidSimulation(format!("need sigma_e2 >= 0, got {sigma_e2}")));
        }
        Ok(Self { a0, b0, sigma_e2, kappa: a0 / b0 })
    }

    pub fn with_noise(&self, sigma_e2: f64) -> Result<Self> {
        Self::new(self.a0, self.b0, sigma_e2)
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn sigma_e2(&self) -> f64 {
        self.sigma_e2
    }

    pub fn sigma_e(&self) -> f64 {
        self.sigma_e2.sqrt()
    }
}

/// One step of the plant.
///
/// Evaluated as `e + b0 (u_prev - (a0/b0) y_prev)`, so an MV input computed
/// from the exact parameters cancels the dynamics without rounding.
pub fn arx_step(system: &ArxSystem, y_prev: f64, u_prev: f64, e_t: f64) -> f64 {
    e_t + system.b0 * (u_prev - system.kappa * y_prev)
}

/// Recursive least-squares state: estimate `theta = (a_hat, b_hat)` and
/// covariance `P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlsState {
    pub theta: Vector2<f64>,
    pub p: Matrix2<f64>,
}

impl RlsState {
    pub fn new(a_hat: f64, b_hat: f64, p: Matrix2<f64>) -> Result<Self> {
        let sym = SymMatrix::symmetrized(nalgebra::DMatrix::from_column_slice(2, 2, p.as_slice()));
        PsdMatrix::new(sym)?;
        Ok(Self { theta: Vector2::new(a_hat, b_hat), p: (p + p.transpose()) * 0.5 })
    }

    /// Prior `P = scale * I`.
    pub fn with_prior(a_hat: f64, b_hat: f64, scale: f64) -> Result<Self> {
        Self::new(a_hat, b_hat, Matrix2::identity() * scale)
    }

    /// A model taken as known: zero covariance, so updates never move it.
    pub fn known(a_hat: f64, b_hat: f64) -> Self {
        Self { theta: Vector2::new(a_hat, b_hat), p: Matrix2::zeros() }
    }

    pub fn a_hat(&self) -> f64 {
        self.theta[0]
    }

    pub fn b_hat(&self) -> f64 {
        self.theta[1]
    }

    pub fn covariance(&self) -> PsdMatrix {
        let m = nalgebra::DMatrix::from_column_slice(2, 2, self.p.as_slice());
        PsdMatrix::new(SymMatrix::symmetrized(m)).expect("RLS covariance stays PSD")
    }

    pub fn update(&mut self, phi: &Vector2<f64>, y: f64) {
        let p_phi = self.p * phi;
        let gain = p_phi / (1.0 + phi.dot(&p_phi));
        self.theta += gain * (y - phi.dot(&self.theta));
        let p = self.p - gain * p_phi.transpose();
        self.p = (p + p.transpose()) * 0.5;
    }
}

/// Pure form of [`RlsState::update`].
pub fn rls_update(state: &RlsState, phi: &Vector2<f64>, y: f64) -> RlsState {
    let mut next = *state;
    next.update(phi, y);
    next
}

/// Batch least-squares fit of the open-loop samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchFit {
    pub theta: Vector2<f64>,
    /// `sum phi phi^T`.
    pub information: Matrix2<f64>,
    /// False when the normal matrix was singular or too ill-conditioned and
    /// the fallback estimate was used.
    pub well_conditioned: bool,
}

fn sym2_eigenvalues(m: &Matrix2<f64>) -> (f64, f64) {
    let half_tr = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let half_diff = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let radius = half_diff.hypot(m[(0, 1)]);
    (half_tr - radius, half_tr + radius)
}

/// Least squares on `(phi, y)` pairs.
///
/// If the normal matrix has condition number `>= FIT_CONDITION_LIMIT`, the
/// fit falls back to `a_hat = 0` and `b_hat` from regressing `y` on the
/// input column alone (or `fallback_b` if the input was zero).
pub fn least_squares_fit(samples: &[(Vector2<f64>, f64)], fallback_b: f64) -> BatchFit {
    let mut information = Matrix2::zeros();
    let mut moment = Vector2::zeros();
    for (phi, y) in samples {
        information += phi * phi.transpose();
        moment += phi * *y;
    }
    let (lo, hi) = sym2_eigenvalues(&information);
    if lo > 0.0 && hi / lo < FIT_CONDITION_LIMIT {
        if let Some(inv) = information.try_inverse() {
            return BatchFit { theta: inv * moment, information, well_conditioned: true };
        }
    }
    let uu = information[(1, 1)];
    let b_hat = if uu > 0.0 { moment[1] / uu } else { fallback_b };
    BatchFit { theta: Vector2::new(0.0, b_hat), information, well_conditioned: false }
}

/// MV gain `K = -a_hat / b_hat`; the input is `u = -K y`.
pub fn mv_gain(a_hat: f64, b_hat: f64) -> Result<f64> {
    if !(b_hat.abs() >= B_FLOOR) {
        return Err(Error::DegenerateEstimate { b_hat });
    }
    Ok(-(a_hat / b_hat))
}

/// LQ gain for the scalar realization `A = -a_hat`, `B = b_hat`:
/// `K = B P A / (r + B^2 P)` with `P` the stabilizing Riccati solution.
pub fn lq_gain_from_estimate(a_hat: f64, b_hat: f64, q: f64, r: f64) -> Result<f64> {
    if !(b_hat.abs() >= B_FLOOR) && a_hat.abs() >= 1.0 {
        return Err(Error::DegenerateEstimate { b_hat });
    }
    let (a, b) = (-a_hat, b_hat);
    let p = solve_scalar_dare(a, b, q, r)?;
    let denom = r + b * b * p;
    if !(denom > 0.0) {
        return Err(Error::DegenerateEstimate { b_hat });
    }
    Ok(b * p * a / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExplorationPolicy {
    Lazy,
    /// Pulse `w(1) = beta`, open loop up to `n_i`, then a frozen controller.
    Immediate {
        beta: f64,
        n_i: usize,
    },
    /// `w(t) = (alpha / sqrt t)^1/2 w_bar(t)`, open loop up to `n_i`, then a
    /// controller refreshed every step.
    Decaying {
        alpha: f64,
        n_i: usize,
    },
}

impl ExplorationPolicy {
    pub fn validate(&self) -> Result<()> {
        let (level, n_i) = match *self {
            ExplorationPolicy::Lazy => return Ok(()),
            ExplorationPolicy::Immediate { beta, n_i } => (beta, n_i),
            ExplorationPolicy::Decaying { alpha, n_i } => (alpha, n_i),
        };
        if !(level >= 0.0 && level.is_finite()) {
            return Err(Error::InvalidSimulation(format!("exploration level must be finite and >= 0, got {level}")));
        }
        if n_i < 2 {
            return Err(Error::InvalidSimulation(format!("open-loop phase needs n_i >= 2, got {n_i}")));
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExplorationPolicy::Lazy => "lazy",
            ExplorationPolicy::Immediate { .. } => "immediate",
            ExplorationPolicy::Decaying { .. } => "decaying",
        }
    }

    fn open_loop_length(&self) -> Option<usize> {
        match *self {
            ExplorationPolicy::Lazy => None,
            ExplorationPolicy::Immediate { n_i, .. } | ExplorationPolicy::Decaying { n_i, .. } => Some(n_i),
        }
    }
}

/// External excitation at time `t >= 1`, given a unit-variance sample.
pub fn exploration_signal(policy: &ExplorationPolicy, t: usize, w_bar: f64) -> f64 {
    match *policy {
        ExplorationPolicy::Lazy => 0.0,
        ExplorationPolicy::Immediate { beta, .. } => {
            if t == 1 {
                beta
            } else {
                0.0
            }
        }
        ExplorationPolicy::Decaying { alpha, .. } => (alpha / (t as f64).sqrt()).sqrt() * w_bar,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlLaw {
    MinimumVariance,
    LinearQuadratic { q: f64, r: f64 },
}

impl ControlLaw {
    pub fn gain(&self, a_hat: f64, b_hat: f64) -> Result<f64> {
        match *self {
            ControlLaw::MinimumVariance => mv_gain(a_hat, b_hat),
            ControlLaw::LinearQuadratic { q, r } => lq_gain_from_estimate(a_hat, b_hat, q, r),
        }
    }
}

/// Recorded signals of one run; `regret` holds per-step increments.
///
/// A diverged run stops early, so all arrays may be shorter than `T`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimTrace {
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub e: Vec<f64>,
    pub regret: Vec<f64>,
}

impl SimTrace {
    fn with_capacity(n: usize) -> Self {
        Self {
            y: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            w: Vec::with_capacity(n),
            e: Vec::with_capacity(n),
            regret: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn cumulative_regret(&self) -> Vec<f64> {
        self.regret
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    pub regret: f64,
    pub diverged: bool,
    /// The open-loop fit fell back to the degenerate estimate.
    pub ill_conditioned: bool,
    pub steps: usize,
    /// Estimate at the end of the run.
    pub estimate: Vector2<f64>,
}

/// A fully specified experiment; runs are driven by noise realizations.
#[derive(Debug, Clone)]
pub struct Simulation {
    system: ArxSystem,
    law: ControlLaw,
    policy: ExplorationPolicy,
    prior: RlsState,
    optimal_gain: f64,
}

impl Simulation {
    /// `prior` is the starting estimate for `Lazy`; for the other policies
    /// it supplies the fallback `b` and the covariance used after a failed
    /// fit.
    pub fn new(system: ArxSystem, law: ControlLaw, policy: ExplorationPolicy, prior: RlsState) -> Result<Self> {
        policy.validate()?;
        let optimal_gain = match law {
            ControlLaw::MinimumVariance => 0.0,
            ControlLaw::LinearQuadratic { .. } => law.gain(system.a0, system.b0)?,
        };
        Ok(Self { system, law, policy, prior, optimal_gain })
    }

    pub fn system(&self) -> &ArxSystem {
        &self.system
    }

    pub fn policy(&self) -> &ExplorationPolicy {
        &self.policy
    }

    /// Regret of one realization. `e_bar` fixes the horizon; `w_bar` is
    /// needed by the decaying policy only.
    pub fn run(&self, e_bar: &[f64], w_bar: Option<&[f64]>) -> Result<RunOutcome> {
        self.execute(e_bar, w_bar, None)
    }

    pub fn trace(&self, e_bar: &[f64], w_bar: Option<&[f64]>) -> Result<(SimTrace, RunOutcome)> {
        let mut trace = SimTrace::with_capacity(e_bar.len());
        let outcome = self.execute(e_bar, w_bar, Some(&mut trace))?;
        Ok((trace, outcome))
    }

    fn execute(&self, e_bar: &[f64], w_bar: Option<&[f64]>, mut trace: Option<&mut SimTrace>) -> Result<RunOutcome> {
        let horizon = e_bar.len();
        if horizon == 0 {
            return Err(Error::InvalidSimulation("empty noise realization".into()));
        }
        let w_bar = match (self.policy, w_bar) {
            (ExplorationPolicy::Decaying { .. }, None) => {
                return Err(Error::InvalidSimulation("decaying exploration needs a w realization".into()))
            }
            (_, Some(w)) if w.len() < horizon => {
                return Err(Error::InvalidSimulation(format!("w realization has {} samples, need {horizon}", w.len())))
            }
            (_, w) => w,
        };

        let sys = &self.system;
        let sigma = sys.sigma_e();
        let open_loop = self.policy.open_loop_length();
        let refresh_each_step = !matches!(self.policy, ExplorationPolicy::Immediate { .. });
        let (q, r) = match self.law {
            ControlLaw::LinearQuadratic { q, r } => (q, r),
            ControlLaw::MinimumVariance => (0.0, 0.0),
        };
        let is_lq = matches!(self.law, ControlLaw::LinearQuadratic { .. });

        let mut rls = self.prior;
        let mut gain = match open_loop {
            None => self.law.gain(rls.a_hat(), rls.b_hat()).ok(),
            Some(_) => None,
        };
        let mut samples: Vec<(Vector2<f64>, f64)> = Vec::with_capacity(open_loop.unwrap_or(0));
        let mut ill_conditioned = false;

        let (mut y_prev, mut u_prev) = (0.0, 0.0);
        let (mut x_opt_prev, mut u_opt_prev) = (0.0, 0.0);
        let mut regret = 0.0;

        for t in 1..=horizon {
            let e = sigma * e_bar[t - 1];
            let y = arx_step(sys, y_prev, u_prev, e);
            if !(y.abs() <= DIVERGENCE_LIMIT) {
                return Ok(RunOutcome {
                    regret: DIVERGED_REGRET,
                    diverged: true,
                    ill_conditioned,
                    steps: t,
                    estimate: rls.theta,
                });
            }
            let phi = Vector2::new(-y_prev, u_prev);

            let learning = match open_loop {
                None => true,
                Some(n_i) if t < n_i => {
                    samples.push((phi, y));
                    false
                }
                Some(n_i) if t == n_i => {
                    samples.push((phi, y));
                    let fit = least_squares_fit(&samples, self.prior.b_hat());
                    ill_conditioned = !fit.well_conditioned;
                    rls.theta = fit.theta;
                    rls.p = match fit.information.try_inverse() {
                        Some(inv) if fit.well_conditioned => (inv + inv.transpose()) * 0.5,
                        _ => self.prior.p,
                    };
                    if let Ok(k) = self.law.gain(rls.a_hat(), rls.b_hat()) {
                        gain = Some(k);
                    }
                    false
                }
                Some(_) => refresh_each_step,
            };
            if learning {
                rls.update(&phi, y);
                if let Ok(k) = self.law.gain(rls.a_hat(), rls.b_hat()) {
                    gain = Some(k);
                }
            }

            let w = exploration_signal(&self.policy, t, w_bar.map_or(0.0, |w| w[t - 1]));
            let u = match gain {
                Some(k) => -k * y + w,
                None => w,
            };

            let step_regret = if is_lq {
                let x_opt = arx_step(sys, x_opt_prev, u_opt_prev, e);
                let u_opt = -self.optimal_gain * x_opt;
                x_opt_prev = x_opt;
                u_opt_prev = u_opt;
                (q * y * y + r * u * u) - (q * x_opt * x_opt + r * u_opt * u_opt)
            } else {
                let d = y - e;
                d * d
            };
            regret += step_regret;

            if let Some(tr) = trace.as_deref_mut() {
                tr.y.push(y);
                tr.u.push(u);
                tr.w.push(w);
                tr.e.push(e);
                tr.regret.push(step_regret);
            }
            y_prev = y;
            u_prev = u;
        }

        Ok(RunOutcome { regret, diverged: false, ill_conditioned, steps: horizon, estimate: rls.theta })
    }
}

/// MV run over `e_bar.len()` steps.
pub fn simulate_mvac(
    system: &ArxSystem,
    policy: &ExplorationPolicy,
    prior: &RlsState,
    e_bar: &[f64],
    w_bar: Option<&[f64]>,
) -> Result<(SimTrace, RunOutcome)> {
    Simulation::new(*system, ControlLaw::MinimumVariance, *policy, *prior)?.trace(e_bar, w_bar)
}

/// LQ run over `e_bar.len()` steps; regret is measured against the
/// true-parameter controller driven by the same `e`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_lqac(
    system: &ArxSystem,
    policy: &ExplorationPolicy,
    prior: &RlsState,
    q: f64,
    r: f64,
    e_bar: &[f64],
    w_bar: Option<&[f64]>,
) -> Result<(SimTrace, RunOutcome)> {
    Simulation::new(*system, ControlLaw::LinearQuadratic { q, r }, *policy, *prior)?.trace(e_bar, w_bar)
}
