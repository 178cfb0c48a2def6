//! Numeric solution of the exploration-design problem.
//!
//! Only the first increment can be nonzero at the optimum, so the search runs
//! over a single PSD matrix `L` in the `Z = I` frame:
//!
//! ```text
//! g(L) = sum_{t=1..T} tr(W (t S + L)^-1) + tr(L),
//! grad g(L) = I - sum_t (t S + L)^-1 W (t S + L)^-1
//! ```
//!
//! minimized by projected gradient with backtracking onto the PSD cone.
//!
//! Evaluating the sums naively costs `T` matrix inversions. Instead the pencil
//! `(S, L + S)` is diagonalized once per evaluation: with `L + S = C C^T`,
//! `C^-1 S C^-T = U D U^T` and `G = C^-T U`,
//! `(t S + L)^-1 = G (I + (t - 1) D)^-1 G^T`, so each sum reduces to scalar
//! series in the generalized eigenvalues `d_i`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{project_psd, psd_sqrt, PsdMatrix, SymMatrix};

use super::{
    c_t_normalized, case2_bounds, case3_bounds, classify_normalized, evaluate_schedule, harmonic_sum, lazy_rate, Case,
    ExcitationSchedule, Normalization, ProblemOneSolution, RegretModelSpec,
};

/// Where the projected-gradient iteration starts, in the normalized frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialPoint {
    /// `sqrt(T) W^1/2`, the optimum when `S = 0`.
    ZeroNoiseOptimum,
    /// `k * I`.
    ScaledIdentity(f64),
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Stop once `||L - P(L - grad g(L))||_F` falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub initial_point: InitialPoint,
    /// Trial step of the first line search.
    pub initial_step: f64,
    /// Start later line searches from the Barzilai-Borwein step instead of
    /// `initial_step`.
    pub barzilai_borwein: bool,
    /// Use the `S = 0` closed form instead of iterating when it applies.
    pub use_closed_form: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 100_000,
            initial_point: InitialPoint::ZeroNoiseOptimum,
            initial_step: 1.0,
            barzilai_borwein: false,
            use_closed_form: true,
        }
    }
}

struct Objective<'a> {
    w: &'a DMatrix<f64>,
    s: &'a DMatrix<f64>,
    horizon: usize,
}

struct Evaluation {
    value: f64,
    gradient: DMatrix<f64>,
}

impl Objective<'_> {
    /// `None` when `L + S` is not positive definite (infinite objective).
    fn evaluate(&self, lam: &DMatrix<f64>) -> Option<Evaluation> {
        let n = lam.nrows();
        let pencil = lam + self.s;
        let chol = pencil.cholesky()?;
        let l_inv = chol.l().solve_lower_triangular(&DMatrix::identity(n, n))?;
        let m = SymMatrix::symmetrized(&l_inv * self.s * l_inv.transpose());
        let eig = m.eigen();
        let d: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
        let g = l_inv.transpose() * &eig.vectors;
        let h = g.transpose() * self.w * &g;

        let mut first = vec![0.0; n];
        let mut second = DMatrix::<f64>::zeros(n, n);
        let mut f = vec![0.0; n];
        for t in (1..=self.horizon).rev() {
            let k = (t - 1) as f64;
            for i in 0..n {
                f[i] = 1.0 / (1.0 + k * d[i]);
                first[i] += f[i];
            }
            for i in 0..n {
                for j in i..n {
                    second[(i, j)] += f[i] * f[j];
                }
            }
        }
        let mut value = lam.trace();
        for i in 0..n {
            value += h[(i, i)] * first[i];
        }
        let weighted = DMatrix::from_fn(n, n, |i, j| {
            let c = if i <= j { second[(i, j)] } else { second[(j, i)] };
            h[(i, j)] * c
        });
        let gradient = DMatrix::identity(n, n) - &g * weighted * g.transpose();
        let gradient = SymMatrix::symmetrized(gradient).into_matrix();
        if !value.is_finite() || gradient.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Evaluation { value, gradient })
    }
}

fn project(m: DMatrix<f64>) -> DMatrix<f64> {
    project_psd(&SymMatrix::symmetrized(m)).into_sym().into_matrix()
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

pub(crate) struct Minimizer {
    pub lambda: DMatrix<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Projected gradient on the normalized problem.
pub(crate) fn minimize_pulse(normalized: &RegretModelSpec, opts: &SolverOptions) -> Result<Minimizer> {
    let n = normalized.dim();
    let objective =
        Objective { w: normalized.w().as_matrix(), s: normalized.s().as_matrix(), horizon: normalized.horizon() };
    let sqrt_t = (normalized.horizon() as f64).sqrt();

    let mut lam = match opts.initial_point {
        InitialPoint::ZeroNoiseOptimum => psd_sqrt(normalized.w()).as_matrix() * sqrt_t,
        InitialPoint::ScaledIdentity(k) => DMatrix::identity(n, n) * k,
    };
    // W may be singular; nudge along the identity until the start is feasible.
    let mut current = objective.evaluate(&lam);
    let mut nudge = 1e-6 * lam.trace().abs().max(1.0);
    while current.is_none() {
        lam += DMatrix::<f64>::identity(n, n) * nudge;
        nudge *= 10.0;
        if nudge > 1e12 {
            return Err(Error::InvalidSpec("no feasible starting point for the pulse solver".into()));
        }
        current = objective.evaluate(&lam);
    }
    let mut current = current.unwrap();
    let mut bb_step: Option<f64> = None;

    for iter in 0..=opts.max_iterations {
        let pg = &lam - project(&lam - &current.gradient);
        let pg_norm = pg.norm();
        if pg_norm < opts.tolerance {
            return Ok(Minimizer { lambda: lam, iterations: iter, gradient_norm: pg_norm });
        }
        if iter == opts.max_iterations {
            return Err(Error::NonConvergence {
                solver: "projected gradient",
                iterations: iter,
                residual: pg_norm,
                context: format!("final projected-gradient norm {pg_norm:e}"),
            });
        }

        let mut step = match (opts.barzilai_borwein, bb_step) {
            (true, Some(s)) => s.clamp(1e-12, 1e12),
            _ => opts.initial_step,
        };
        let mut accepted = None;
        for _ in 0..200 {
            let cand = project(&lam - &current.gradient * step);
            if let Some(eval) = objective.evaluate(&cand) {
                let delta = &cand - &lam;
                let model = inner(&current.gradient, &delta) + delta.norm_squared() / (2.0 * step);
                // Near the optimum the decrease drowns in the rounding of the
                // objective; the trapezoid estimate from gradients does not.
                let mut change = eval.value - current.value;
                if change.abs() < 1e3 * f64::EPSILON * current.value.abs() {
                    change = 0.5 * inner(&(&current.gradient + &eval.gradient), &delta);
                }
                if change <= model {
                    accepted = Some((cand, eval));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((cand, eval)) = accepted else {
            return Err(Error::NonConvergence {
                solver: "projected gradient",
                iterations: iter,
                residual: pg_norm,
                context: format!("line search failed; projected-gradient norm {pg_norm:e}"),
            });
        };

        let s_k = &cand - &lam;
        let y_k = &eval.gradient - &current.gradient;
        let sy = inner(&s_k, &y_k);
        bb_step = if sy > 0.0 { Some(s_k.norm_squared() / sy) } else { None };
        lam = cand;
        current = eval;
    }
    unreachable!("loop returns on the last iteration")
}

/// Solves one instance with default options.
pub fn solve_problem_one(spec: &RegretModelSpec) -> Result<ProblemOneSolution> {
    solve_problem_one_with(spec, &SolverOptions::default())
}

pub fn solve_problem_one_with(spec: &RegretModelSpec, opts: &SolverOptions) -> Result<ProblemOneSolution> {
    let norm = Normalization::symmetric(spec.z())?;
    solve_problem_one_in_frame(spec, &norm, opts)
}

/// Solves in the frame given by `norm` and maps the pulse back.
pub fn solve_problem_one_in_frame(
    spec: &RegretModelSpec,
    norm: &Normalization,
    opts: &SolverOptions,
) -> Result<ProblemOneSolution> {
    let normalized = norm.apply(spec)?;
    let case = classify_normalized(&normalized)?;
    let horizon = spec.horizon();
    let n = spec.dim();

    if case == Case::Lazy {
        let regret = lazy_rate(&normalized)? * harmonic_sum(horizon);
        return Ok(ProblemOneSolution {
            case,
            x1: PsdMatrix::zeros(n),
            regret,
            lower_bound: regret,
            upper_bound: regret,
            c_t: Some(c_t_normalized(&normalized)?),
            iterations: 0,
            gradient_norm: 0.0,
        });
    }

    let (c_t, (lower_bound, upper_bound)) = match case {
        Case::ImmediateFullRank => (Some(c_t_normalized(&normalized)?), case2_bounds(spec)?),
        _ => (None, case3_bounds(spec)?),
    };

    if opts.use_closed_form && normalized.s().sym().is_zero() {
        let sqrt_t = (horizon as f64).sqrt();
        let root = psd_sqrt(normalized.w());
        let x1 = norm.backward(&root.scale(sqrt_t));
        return Ok(ProblemOneSolution {
            case,
            x1,
            regret: 2.0 * sqrt_t * root.trace(),
            lower_bound,
            upper_bound,
            c_t,
            iterations: 0,
            gradient_norm: 0.0,
        });
    }

    let found = minimize_pulse(&normalized, opts)?;
    let x1_normalized = project_psd(&SymMatrix::symmetrized(found.lambda));
    let x1 = norm.backward(&x1_normalized);
    let regret = evaluate_schedule(spec, &ExcitationSchedule::pulse(x1.clone(), horizon))?;
    Ok(ProblemOneSolution {
        case,
        x1,
        regret,
        lower_bound,
        upper_bound,
        c_t,
        iterations: found.iterations,
        gradient_norm: found.gradient_norm,
    })
}
