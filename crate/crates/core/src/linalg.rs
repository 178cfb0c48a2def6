//! Small dense symmetric-matrix kernel.
//!
//! Everything in the crate that is symmetric (Fisher information, excitation
//! increments, weighting matrices, Riccati solutions) goes through
//! [`SymMatrix`] or [`PsdMatrix`]. Storage is an `nalgebra::DMatrix` that is
//! kept exactly symmetric: every constructor and every operation that returns a
//! symmetric result re-symmetrizes with `(M + M^T) / 2`, which is bit-exact
//! symmetric because IEEE addition commutes.
//!
//! Dimensions here are tiny (1x1 to 8x8), so the eigensolver is plain cyclic
//! Jacobi and the Riccati solver is a fixed-point iteration.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative tolerance used to accept round-off-negative eigenvalues as PSD.
pub const PSD_REL_TOL: f64 = 1e-10;

const SYMMETRY_REL_TOL: f64 = 1e-9;
const JACOBI_MAX_SWEEPS: usize = 64;

pub const DARE_MAX_ITERATIONS: usize = 1_000_000;
const DARE_STEP_TOL: f64 = 1e-12;
const DARE_RESIDUAL_TOL: f64 = 1e-10;

/// A real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl SymMatrix {
    /// Wraps `m`, rejecting non-square or visibly asymmetric input. Round-off
    /// asymmetry (relative 1e-9) is averaged away.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "symmetric matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.amax().max(1.0);
        let asymmetry = (&m - m.transpose()).amax();
        if !asymmetry.is_finite() || asymmetry > SYMMETRY_REL_TOL * scale {
            return Err(Error::NotSymmetric { asymmetry });
        }
        Ok(Self::symmetrized(m))
    }

    /// `(m + m^T) / 2` without any symmetry check.
    pub fn symmetrized(m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "symmetrized() needs a square matrix");
        let n = m.nrows();
        let mut out = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = (out[(i, j)] + out[(j, i)]) * 0.5;
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Self { m: out }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("rows must form a non-empty square".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        Self { m: DMatrix::identity(n, n) }
    }

    pub fn zeros(n: usize) -> Self {
        Self { m: DMatrix::zeros(n, n) }
    }

    pub fn scalar(v: f64) -> Self {
        Self { m: DMatrix::from_element(1, 1, v) }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self { m: DMatrix::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 }) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| (0..self.dim()).map(|j| self.m[(i, j)]).collect()).collect()
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn is_zero(&self) -> bool {
        self.m.iter().all(|&v| v == 0.0)
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        Self { m: &self.m + &other.m }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        Self { m: &self.m - &other.m }
    }

    pub fn scale(&self, k: f64) -> SymMatrix {
        Self { m: &self.m * k }
    }

    /// `F^T M F`.
    pub fn congruence(&self, f: &DMatrix<f64>) -> SymMatrix {
        Self::symmetrized(f.transpose() * &self.m * f)
    }

    /// Cholesky-based inverse; fails unless the matrix is positive definite.
    pub fn inverse_pd(&self) -> Result<SymMatrix> {
        let chol =
            self.m.clone().cholesky().ok_or_else(|| Error::Singular("matrix is not positive definite".into()))?;
        Ok(Self::symmetrized(chol.inverse()))
    }

    pub fn eigen(&self) -> SymEigen {
        sym_eigen(self)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigen().values[0]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigen().values.last().expect("non-empty matrix")
    }
}

/// A symmetric matrix whose eigenvalues are all `>= -1e-10 * max(1, ||M||_2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMatrix(SymMatrix);

impl PsdMatrix {
    pub fn new(m: SymMatrix) -> Result<Self> {
        let eig = m.eigen();
        let spectral = eig.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let min = *eig.values.last().expect("non-empty matrix");
        if !min.is_finite() || min < -PSD_REL_TOL * spectral.max(1.0) {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(SymMatrix::from_rows(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        Self(SymMatrix::identity(n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(SymMatrix::zeros(n))
    }

    pub fn scalar(v: f64) -> Result<Self> {
        Self::new(SymMatrix::scalar(v))
    }

    pub fn sym(&self) -> &SymMatrix {
        &self.0
    }

    pub fn into_sym(self) -> SymMatrix {
        self.0
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        self.0.as_matrix()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn add(&self, other: &PsdMatrix) -> PsdMatrix {
        PsdMatrix(self.0.add(&other.0))
    }

    /// Scaling by `k >= 0` keeps the cone.
    pub fn scale(&self, k: f64) -> PsdMatrix {
        assert!(k >= 0.0, "negative scaling leaves the PSD cone");
        PsdMatrix(self.0.scale(k))
    }

    pub fn congruence(&self, f: &DMatrix<f64>) -> PsdMatrix {
        PsdMatrix(self.0.congruence(f))
    }

    /// True when the smallest eigenvalue exceeds `rel_tol * lambda_max`
    /// (and `lambda_max > 0`).
    pub fn is_positive_definite(&self, rel_tol: f64) -> bool {
        let eig = self.0.eigen();
        let max = eig.values[0];
        let min = *eig.values.last().unwrap();
        max > 0.0 && min > rel_tol * max
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Sorted in descending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, column `k` pairs with `values[k]`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let s = f(self.values[k]);
            scaled.column_mut(k).scale_mut(s);
        }
        SymMatrix::symmetrized(scaled * self.vectors.transpose())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|l| l)
    }
}

/// Cyclic Jacobi eigen-decomposition; eigenvalues descending.
pub fn sym_eigen(m: &SymMatrix) -> SymEigen {
    let n = m.dim();
    let mut a = m.as_matrix().clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let total = a.norm_squared();
    let threshold = (f64::EPSILON * f64::EPSILON) * total;

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off <= threshold || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    SymEigen { values, vectors }
}

/// Unique PSD square root.
pub fn psd_sqrt(m: &PsdMatrix) -> PsdMatrix {
    PsdMatrix(m.sym().eigen().reconstruct_with(|l| l.max(0.0).sqrt()))
}

/// Frobenius-nearest PSD matrix: clip negative eigenvalues to zero.
pub fn project_psd(m: &SymMatrix) -> PsdMatrix {
    PsdMatrix(m.eigen().reconstruct_with(|l| l.max(0.0)))
}

fn check_lq_dims(a: &DMatrix<f64>, b: &DMatrix<f64>, n_q: Option<usize>) -> Result<usize> {
    let n = a.nrows();
    if a.ncols() != n || n == 0 {
        return Err(Error::Dimension(format!("A must be square, got {}x{}", a.nrows(), a.ncols())));
    }
    if b.nrows() != n || b.ncols() != 1 {
        return Err(Error::Dimension(format!("B must be {n}x1, got {}x{}", b.nrows(), b.ncols())));
    }
    if let Some(nq) = n_q {
        if nq != n {
            return Err(Error::Dimension(format!("Q must be {n}x{n}, got {nq}x{nq}")));
        }
    }
    Ok(n)
}

fn dare_rhs(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: f64, p: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let pa = p * a;
    let bt_pa = b.transpose() * &pa; // 1 x n
    let denom = r + (b.transpose() * p * b)[(0, 0)];
    if !(denom > 0.0) {
        return None;
    }
    let at_pb = bt_pa.transpose();
    Some(a.transpose() * &pa + q - (&at_pb * &bt_pa) / denom)
}

/// Frobenius norm of `P - (A^T P A + Q - A^T P B (R + B^T P B)^-1 B^T P A)`.
pub fn riccati_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &PsdMatrix, r: f64, p: &PsdMatrix) -> f64 {
    match dare_rhs(a, b, q.as_matrix(), r, p.as_matrix()) {
        Some(rhs) => (p.as_matrix() - rhs).norm(),
        None => f64::INFINITY,
    }
}

/// Solves the discrete algebraic Riccati equation for a single-input system by
/// iterating the Riccati map from `P_0 = Q`.
pub fn solve_dare(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &PsdMatrix, r: f64) -> Result<PsdMatrix> {
    check_lq_dims(a, b, Some(q.dim()))?;
    if !(r >= 0.0) {
        return Err(Error::InvalidSpec(format!("R must be >= 0, got {r}")));
    }
    let describe =
        || format!("A = {:?}, B = {:?}, Q = {:?}, R = {r}", a.as_slice(), b.as_slice(), q.as_matrix().as_slice());
    let qm = q.as_matrix();
    let mut p = qm.clone();
    let mut step = f64::INFINITY;
    let mut polishing = false;
    for iter in 1..=DARE_MAX_ITERATIONS {
        let next =
            dare_rhs(a, b, qm, r, &p).ok_or_else(|| Error::Singular(format!("R + B^T P B <= 0 for {}", describe())))?;
        let next = SymMatrix::symmetrized(next).into_matrix();
        let prev_step = step;
        step = (&next - &p).amax();
        p = next;
        if !step.is_finite() {
            break;
        }
        // past the step tolerance, keep iterating until rounding stalls the step
        let scale = p.amax().max(1.0);
        polishing |= step <= DARE_STEP_TOL * scale;
        if polishing && (step >= prev_step || step <= f64::EPSILON * scale) {
            let sol = PsdMatrix::new(SymMatrix::symmetrized(p))?;
            let residual = riccati_residual(a, b, q, r, &sol);
            if residual <= DARE_RESIDUAL_TOL * sol.as_matrix().norm().max(f64::MIN_POSITIVE) {
                return Ok(sol);
            }
            return Err(Error::NonConvergence {
                solver: "DARE fixed-point iteration",
                iterations: iter,
                residual,
                context: describe(),
            });
        }
    }
    Err(Error::NonConvergence {
        solver: "DARE fixed-point iteration",
        iterations: DARE_MAX_ITERATIONS,
        residual: step,
        context: describe(),
    })
}

/// Closed-form positive root of the scalar Riccati equation
/// `b^2 p^2 + (r (1 - a^2) - q b^2) p - q r = 0`.
///
/// Used on the simulation hot path, where the controller is redesigned every
/// step; [`solve_dare`] is the reference it is tested against.
pub fn solve_scalar_dare(a: f64, b: f64, q: f64, r: f64) -> Result<f64> {
    if !(q > 0.0) || !(r >= 0.0) {
        return Err(Error::InvalidSpec(format!("need q > 0 and r >= 0, got q = {q}, r = {r}")));
    }
    let lin = r * (1.0 - a * a) - q * b * b;
    let disc = lin * lin + 4.0 * b * b * q * r;
    let root = disc.sqrt();
    let p = if lin <= 0.0 {
        if b == 0.0 {
            return Err(Error::Singular(format!("(a, b) = ({a}, 0) is not stabilizable")));
        }
        (root - lin) / (2.0 * b * b)
    } else {
        2.0 * q * r / (lin + root)
    };
    if !p.is_finite() || p <= 0.0 {
        return Err(Error::Singular(format!("no positive Riccati solution for a = {a}, b = {b}")));
    }
    Ok(p)
}

/// `K = (R + B^T P B)^-1 B^T P A`, a `1 x n` row.
pub fn lqr_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, r: f64, p: &PsdMatrix) -> Result<DMatrix<f64>> {
    check_lq_dims(a, b, Some(p.dim()))?;
    let pm = p.as_matrix();
    let denom = r + (b.transpose() * pm * b)[(0, 0)];
    if !(denom > 0.0) {
        return Err(Error::Singular(format!("R + B^T P B = {denom} is not positive")));
    }
    Ok(b.transpose() * pm * a / denom)
}

/// Largest eigenvalue modulus of a general square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}
