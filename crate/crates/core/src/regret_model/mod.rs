//! Finite-horizon exploration design under the information-based regret model.
//!
//! An instance ([`RegretModelSpec`]) fixes a degradation weight `W`, an
//! excitation-power normalizer `Z`, the per-step noise information `S` and a
//! horizon `T`. The decision variables are PSD information increments
//! `L_w,1..T` injected by external excitation, and the modeled regret is
//!
//! ```text
//! R(T) = sum_{t=1..T} tr(W I_t^-1) + tr(Z^-1 L_w,t),   I_t = t S + sum_{k<=t} L_w,k
//! ```
//!
//! The optimum always concentrates all excitation at `t = 1`. Whether that
//! pulse is zero (lazy) or not (immediate) is decided by [`classify_case`]:
//!
//! | case | condition | optimal pulse |
//! |------|-----------|---------------|
//! | 1 | `S > 0` and `c_T >= 1` | zero, regret `tr(S^-1 W) * H_T` |
//! | 2 | `S > 0` and `c_T < 1` | nonzero, solved numerically |
//! | 3 | `S` singular | nonzero, closed form when `S = 0` |
//!
//! Every instance is first mapped to the frame where `Z = I`
//! ([`Normalization`]); classification, bounds and the numeric solver all work
//! in that frame and results are mapped back.

mod bounds;
mod solver;

use nalgebra::DMatrix;
use serde::Serialize;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt, PsdMatrix, SymMatrix};

pub use bounds::{case2_bounds, case3_bounds};
pub use solver::{solve_problem_one, solve_problem_one_in_frame, solve_problem_one_with, InitialPoint, SolverOptions};

/// Eigenvalues below `RANK_REL_TOL * lambda_max` count as zero when deciding
/// whether `S` is singular.
pub const RANK_REL_TOL: f64 = 1e-10;

/// Relative slack allowed when checking `lower <= regret <= upper`.
pub const BOUND_SLACK: f64 = 1e-6;

/// One instance of the exploration-design problem.
#[derive(Debug, Clone)]
pub struct RegretModelSpec {
    w: PsdMatrix,
    z: PsdMatrix,
    s: PsdMatrix,
    horizon: usize,
}

impl RegretModelSpec {
    pub fn new(w: PsdMatrix, z: PsdMatrix, s: PsdMatrix, horizon: usize) -> Result<Self> {
        let n = w.dim();
        if z.dim() != n || s.dim() != n {
            return Err(Error::Dimension(format!(
                "W, Z and S must share a dimension, got {}, {}, {}",
                n,
                z.dim(),
                s.dim()
            )));
        }
        if horizon == 0 {
            return Err(Error::InvalidSpec("horizon T must be >= 1".into()));
        }
        if !z.is_positive_definite(RANK_REL_TOL) {
            return Err(Error::InvalidSpec("Z must be positive definite".into()));
        }
        Ok(Self { w, z, s, horizon })
    }

    /// Scalar instance.
    pub fn scalar(w: f64, z: f64, s: f64, horizon: usize) -> Result<Self> {
        Self::new(PsdMatrix::scalar(w)?, PsdMatrix::scalar(z)?, PsdMatrix::scalar(s)?, horizon)
    }

    pub fn w(&self) -> &PsdMatrix {
        &self.w
    }

    pub fn z(&self) -> &PsdMatrix {
        &self.z
    }

    pub fn s(&self) -> &PsdMatrix {
        &self.s
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.w.dim()
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        Self::new(self.w.clone(), self.z.clone(), self.s.clone(), horizon)
    }
}

/// Which of the three solution regimes an instance falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Case {
    /// `S > 0`, `c_T >= 1`: no excitation.
    #[serde(rename = "Case1")]
    Lazy,
    /// `S > 0`, `c_T < 1`: one nonzero pulse at `t = 1`.
    #[serde(rename = "Case2")]
    ImmediateFullRank,
    /// `S` singular: one nonzero pulse at `t = 1`.
    #[serde(rename = "Case3")]
    ImmediateSingular,
}

impl Case {
    pub fn is_lazy(self) -> bool {
        self == Case::Lazy
    }

    pub fn label(self) -> &'static str {
        match self {
            Case::Lazy => "Case1",
            Case::ImmediateFullRank => "Case2",
            Case::ImmediateSingular => "Case3",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A sequence of `T` PSD excitation increments `L_w,1..T`.
#[derive(Debug, Clone)]
pub struct ExcitationSchedule {
    steps: Vec<PsdMatrix>,
}

impl ExcitationSchedule {
    pub fn new(steps: Vec<PsdMatrix>) -> Result<Self> {
        let Some(first) = steps.first() else {
            return Err(Error::InvalidSpec("schedule must have at least one step".into()));
        };
        let n = first.dim();
        if let Some(bad) = steps.iter().position(|m| m.dim() != n) {
            return Err(Error::Dimension(format!("schedule step {} has a different dimension", bad + 1)));
        }
        Ok(Self { steps })
    }

    pub fn zeros(dim: usize, horizon: usize) -> Self {
        Self { steps: vec![PsdMatrix::zeros(dim); horizon] }
    }

    /// `x1` at `t = 1`, zero afterwards.
    pub fn pulse(x1: PsdMatrix, horizon: usize) -> Self {
        let n = x1.dim();
        let mut steps = vec![PsdMatrix::zeros(n); horizon];
        steps[0] = x1;
        Self { steps }
    }

    /// `L_w,t = (alpha / sqrt(t)) * shape`: the model-level analogue of
    /// `1/sqrt(t)`-decaying excitation.
    pub fn decaying(alpha: f64, shape: &PsdMatrix, horizon: usize) -> Self {
        let steps = (1..=horizon).map(|t| shape.scale(alpha / (t as f64).sqrt())).collect();
        Self { steps }
    }

    pub fn steps(&self) -> &[PsdMatrix] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.steps[0].dim()
    }
}

/// Result of solving one instance.
#[derive(Debug, Clone)]
pub struct ProblemOneSolution {
    pub case: Case,
    /// Optimal `L_w,1`; all later increments are zero.
    pub x1: PsdMatrix,
    pub regret: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// Defined only when `S` is nonsingular.
    pub c_t: Option<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl ProblemOneSolution {
    pub fn schedule(&self, horizon: usize) -> ExcitationSchedule {
        ExcitationSchedule::pulse(self.x1.clone(), horizon)
    }

    /// `lower - slack <= regret <= upper + slack` with `slack = 1e-6 |regret|`.
    pub fn within_bounds(&self) -> bool {
        let slack = BOUND_SLACK * self.regret.abs();
        self.lower_bound - slack <= self.regret && self.regret <= self.upper_bound + slack
    }
}

/// `sum_{t=1..T} 1/t`, summed from the small end.
pub fn harmonic_sum(horizon: usize) -> f64 {
    (1..=horizon).rev().map(|t| 1.0 / t as f64).sum()
}

/// `sum_{t=1..T} 1/t^2`, summed from the small end.
pub fn basel_sum(horizon: usize) -> f64 {
    (1..=horizon).rev().map(|t| 1.0 / (t as f64 * t as f64)).sum()
}

/// The change of variables to the `Z = I` frame.
///
/// With any factor `F` such that `F F^T = Z^-1`, the instance
/// `(W, Z, S)` maps to `(F^T W F, I, F^T S F)` with the same objective value,
/// and a normalized increment `X_F` maps back as `X = F^-T X_F F^-1`. The
/// default factor is the symmetric root `V = Z^-1/2`.
#[derive(Debug, Clone)]
pub struct Normalization {
    factor: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl Normalization {
    /// `F = Z^-1/2`, `F^-1 = Z^1/2`.
    pub fn symmetric(z: &PsdMatrix) -> Result<Self> {
        if !z.is_positive_definite(RANK_REL_TOL) {
            return Err(Error::InvalidSpec("Z must be positive definite".into()));
        }
        let eig = z.sym().eigen();
        let factor = eig.reconstruct_with(|l| 1.0 / l.sqrt()).into_matrix();
        let inverse = eig.reconstruct_with(f64::sqrt).into_matrix();
        Ok(Self { factor, inverse })
    }

    /// Any factor with `F F^T = Z^-1`.
    pub fn from_factor(z: &PsdMatrix, factor: DMatrix<f64>) -> Result<Self> {
        let n = z.dim();
        if factor.nrows() != n || factor.ncols() != n {
            return Err(Error::Dimension("normalization factor must match Z".into()));
        }
        let inverse = factor.clone().try_inverse().ok_or_else(|| Error::Singular("normalization factor".into()))?;
        let check = &factor * factor.transpose() * z.as_matrix();
        let err = (check - DMatrix::<f64>::identity(n, n)).amax();
        if err > 1e-8 {
            return Err(Error::InvalidSpec(format!("F F^T Z differs from I by {err:e}")));
        }
        Ok(Self { factor, inverse })
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// `F^T X F`.
    pub fn forward(&self, x: &PsdMatrix) -> PsdMatrix {
        x.congruence(&self.factor)
    }

    /// `F^-T X F^-1`.
    pub fn backward(&self, x: &PsdMatrix) -> PsdMatrix {
        x.congruence(&self.inverse)
    }

    pub fn apply(&self, spec: &RegretModelSpec) -> Result<RegretModelSpec> {
        RegretModelSpec::new(
            self.forward(spec.w()),
            PsdMatrix::identity(spec.dim()),
            self.forward(spec.s()),
            spec.horizon(),
        )
    }
}

/// Maps `spec` to the `Z = I` frame using the symmetric root of `Z^-1`.
pub fn normalize_spec(spec: &RegretModelSpec) -> Result<(RegretModelSpec, Normalization)> {
    let norm = Normalization::symmetric(spec.z())?;
    Ok((norm.apply(spec)?, norm))
}

/// Eigen-split of `S`: null-space basis (columns) and the nonzero
/// eigenpairs.
pub(crate) struct NullSplit {
    pub null_basis: DMatrix<f64>,
    pub range: Vec<(f64, nalgebra::DVector<f64>)>,
}

pub(crate) fn null_split(s: &PsdMatrix) -> NullSplit {
    let eig = s.sym().eigen();
    let max = eig.values[0].max(0.0);
    let tol = RANK_REL_TOL * max;
    let mut null_cols = Vec::new();
    let mut range = Vec::new();
    for (k, &l) in eig.values.iter().enumerate() {
        let v = eig.vectors.column(k).into_owned();
        if max <= 0.0 || l <= tol {
            null_cols.push(v);
        } else {
            range.push((l, v));
        }
    }
    let n = s.dim();
    let null_basis = if null_cols.is_empty() { DMatrix::zeros(n, 0) } else { DMatrix::from_columns(&null_cols) };
    NullSplit { null_basis, range }
}

pub(crate) fn is_singular(s: &PsdMatrix) -> bool {
    null_split(s).null_basis.ncols() > 0
}

fn require_nonsingular(s: &PsdMatrix, what: &str) -> Result<SymMatrix> {
    if is_singular(s) {
        return Err(Error::Singular(format!("S is singular; {what} is undefined")));
    }
    s.sym().inverse_pd()
}

/// `c_T = (lambda_max(Z S^-1 W S^-1) * sum_t 1/t^2)^-1`, computed in the
/// original frame as `lambda_max(Z^1/2 S^-1 W S^-1 Z^1/2)`.
pub fn compute_c_t(spec: &RegretModelSpec) -> Result<f64> {
    let s_inv = require_nonsingular(spec.s(), "c_T")?;
    let m = spec.w().sym().congruence(s_inv.as_matrix());
    let z_half = psd_sqrt(spec.z());
    let lam = m.congruence(z_half.as_matrix()).max_eigenvalue();
    Ok(1.0 / (lam * basel_sum(spec.horizon())))
}

/// `c_T` of an already-normalized spec: `1 / (lambda_max(S^-1 W S^-1) beta_T)`.
pub(crate) fn c_t_normalized(normalized: &RegretModelSpec) -> Result<f64> {
    let s_inv = require_nonsingular(normalized.s(), "c_T")?;
    let lam = normalized.w().sym().congruence(s_inv.as_matrix()).max_eigenvalue();
    Ok(1.0 / (lam * basel_sum(normalized.horizon())))
}

/// Lazy iff `S > 0` and `c_T >= 1` in the normalized frame.
pub fn classify_case(spec: &RegretModelSpec) -> Result<Case> {
    let (normalized, _) = normalize_spec(spec)?;
    classify_normalized(&normalized)
}

pub(crate) fn classify_normalized(normalized: &RegretModelSpec) -> Result<Case> {
    if is_singular(normalized.s()) {
        return Ok(Case::ImmediateSingular);
    }
    let c = c_t_normalized(normalized)?;
    Ok(if c >= 1.0 { Case::Lazy } else { Case::ImmediateFullRank })
}

/// `tr(S^-1 W)`, the per-`1/t` regret of never exciting.
pub fn lazy_rate(spec: &RegretModelSpec) -> Result<f64> {
    let s_inv = require_nonsingular(spec.s(), "the lazy regret")?;
    Ok((s_inv.as_matrix() * spec.w().as_matrix()).trace())
}

/// `tr(S^-1 W) * sum_t 1/t`.
pub fn lazy_regret(spec: &RegretModelSpec) -> Result<f64> {
    Ok(lazy_rate(spec)? * harmonic_sum(spec.horizon()))
}

/// Modeled regret of an arbitrary schedule.
pub fn evaluate_schedule(spec: &RegretModelSpec, schedule: &ExcitationSchedule) -> Result<f64> {
    if schedule.len() != spec.horizon() {
        return Err(Error::InvalidSpec(format!("schedule has {} steps but T = {}", schedule.len(), spec.horizon())));
    }
    if schedule.dim() != spec.dim() {
        return Err(Error::Dimension("schedule dimension differs from the spec".into()));
    }
    let n = spec.dim();
    let z_inv = spec.z().sym().inverse_pd()?;
    let s = spec.s().as_matrix();
    let w = spec.w().as_matrix();
    let mut cumulative = DMatrix::<f64>::zeros(n, n);
    let mut total = 0.0;
    for (idx, step) in schedule.steps().iter().enumerate() {
        let t = idx + 1;
        let x = step.as_matrix();
        if x.iter().any(|&v| v != 0.0) {
            cumulative += x;
            total += (z_inv.as_matrix() * x).trace();
        }
        let info = SymMatrix::symmetrized(s * t as f64 + &cumulative);
        let chol = info.into_matrix().cholesky().ok_or(Error::InfiniteRegret { t })?;
        let term = chol.solve(w).trace();
        if !term.is_finite() {
            return Err(Error::InfiniteRegret { t });
        }
        total += term;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn c_t_examples() {
        assert_eq!(compute_c_t(&RegretModelSpec::scalar(1.0, 1.0, 1.0, 1).unwrap()).unwrap(), 1.0);
        assert_relative_eq!(
            compute_c_t(&RegretModelSpec::scalar(1.0, 1.0, 1.0, 2).unwrap()).unwrap(),
            0.8,
            epsilon = 1e-15
        );
        let big = compute_c_t(&RegretModelSpec::scalar(1.0, 1.0, 1.0, 1_000_000).unwrap()).unwrap();
        assert!((big - 6.0 / std::f64::consts::PI.powi(2)).abs() < 1e-5);
    }

    #[test]
    fn c_t_rejects_singular_s() {
        let spec = RegretModelSpec::scalar(1.0, 1.0, 0.0, 5).unwrap();
        assert!(matches!(compute_c_t(&spec), Err(Error::Singular(_))));
    }

    #[test]
    fn normalization_examples() {
        let spec = RegretModelSpec::scalar(3.0, 1.0, 2.0, 4).unwrap();
        let (n, norm) = normalize_spec(&spec).unwrap();
        assert_eq!(norm.factor()[(0, 0)], 1.0);
        assert_eq!(n.s().as_matrix()[(0, 0)], 2.0);
        assert_eq!(n.w().as_matrix()[(0, 0)], 3.0);

        let spec = RegretModelSpec::scalar(1.0, 4.0, 1.0, 4).unwrap();
        let (n, norm) = normalize_spec(&spec).unwrap();
        assert_relative_eq!(norm.factor()[(0, 0)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(n.s().as_matrix()[(0, 0)], 0.25, epsilon = 1e-15);
        assert_relative_eq!(n.w().as_matrix()[(0, 0)], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn classification_examples() {
        let case = |s: f64, t: usize| classify_case(&RegretModelSpec::scalar(1.0, 1.0, s, t).unwrap()).unwrap();
        assert_eq!(case(1.0, 1), Case::Lazy);
        assert_eq!(case(1.0, 2), Case::ImmediateFullRank);
        assert_eq!(case(0.0, 1), Case::ImmediateSingular);
        assert_eq!(case(0.0, 1000), Case::ImmediateSingular);
    }

    #[test]
    fn lazy_regret_examples() {
        assert_eq!(lazy_regret(&RegretModelSpec::scalar(1.0, 1.0, 1.0, 1).unwrap()).unwrap(), 1.0);
        assert_eq!(lazy_regret(&RegretModelSpec::scalar(1.0, 1.0, 1.0, 2).unwrap()).unwrap(), 1.5);
    }

    #[test]
    fn zero_schedule_is_harmonic() {
        let spec = RegretModelSpec::scalar(1.0, 1.0, 1.0, 3).unwrap();
        let r = evaluate_schedule(&spec, &ExcitationSchedule::zeros(1, 3)).unwrap();
        assert_relative_eq!(r, 1.0 + 0.5 + 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn singular_information_is_infinite_regret() {
        let spec = RegretModelSpec::scalar(1.0, 1.0, 0.0, 3).unwrap();
        let err = evaluate_schedule(&spec, &ExcitationSchedule::zeros(1, 3)).unwrap_err();
        assert!(matches!(err, Error::InfiniteRegret { t: 1 }));
    }

    #[test]
    fn schedule_length_must_match_horizon() {
        let spec = RegretModelSpec::scalar(1.0, 1.0, 1.0, 3).unwrap();
        assert!(evaluate_schedule(&spec, &ExcitationSchedule::zeros(1, 2)).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(RegretModelSpec::scalar(1.0, 0.0, 1.0, 3).is_err());
        assert!(RegretModelSpec::scalar(1.0, 1.0, 1.0, 0).is_err());
        let two = PsdMatrix::identity(2);
        let one = PsdMatrix::identity(1);
        assert!(RegretModelSpec::new(two.clone(), one, two, 3).is_err());
    }

    #[test]
    fn partial_sums() {
        assert_eq!(harmonic_sum(1), 1.0);
        assert_eq!(basel_sum(2), 1.25);
        assert!((harmonic_sum(100) - 5.187_377_517_639_621).abs() < 1e-13);
    }
}
