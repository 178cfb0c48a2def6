use crate::error::{Error, Result};
use crate::linalg::psd_sqrt;

use super::{c_t_normalized, harmonic_sum, lazy_rate, normalize_spec, null_split, RegretModelSpec, RANK_REL_TOL};

/// Bracket for the nonsingular-`S` case:
/// `(2 - c_T) c_T tr(S^-1 W) H_T <= R(T) <= tr(S^-1 W) H_T`.
pub fn case2_bounds(spec: &RegretModelSpec) -> Result<(f64, f64)> {
    let (normalized, _) = normalize_spec(spec)?;
    let c = c_t_normalized(&normalized)?;
    let upper = lazy_rate(&normalized)? * harmonic_sum(spec.horizon());
    let lower = if c.is_finite() { (2.0 - c) * c * upper } else { upper };
    Ok((lower, upper))
}

/// Bracket for singular `S`, evaluated in the `Z = I` frame.
///
/// With `{n_k}` an orthonormal basis of `null(S)`, `W~ = W^1/2` and
/// `S = sum_k l_k e_k e_k^T` over the nonzero eigenpairs:
///
/// ```text
/// lower = 2 sqrt(T) sum_k n_k' W~ n_k
/// upper = sqrt(T) (sum_k n_k' W n_k / n_k' W~ n_k + sum_k n_k' W~ n_k) + H_T sum_k e_k' W e_k / l_k
/// ```
///
/// The upper value is the cost of the feasible pulse
/// `sqrt(T) sum_k (n_k' W~ n_k) n_k n_k'`. Its value depends on the basis; the
/// basis used here diagonalizes `N^T W~ N`, which makes the bracket collapse
/// to a point when `S = 0`.
pub fn case3_bounds(spec: &RegretModelSpec) -> Result<(f64, f64)> {
    let (normalized, _) = normalize_spec(spec)?;
    let split = null_split(normalized.s());
    let m = split.null_basis.ncols();
    if m == 0 {
        return Err(Error::InvalidSpec("case-3 bounds need a singular S".into()));
    }
    if !normalized.w().is_positive_definite(RANK_REL_TOL) {
        return Err(Error::InvalidSpec("W must be positive definite when S is singular".into()));
    }
    let w = normalized.w().as_matrix();
    let w_root = psd_sqrt(normalized.w());
    let projected = w_root.congruence(&split.null_basis);
    let rotation = projected.sym().eigen().vectors;
    let basis = &split.null_basis * rotation;

    let sqrt_t = (spec.horizon() as f64).sqrt();
    let mut root_sum = 0.0;
    let mut ratio_sum = 0.0;
    for k in 0..m {
        let n_k = basis.column(k);
        let root_quad = (n_k.transpose() * w_root.as_matrix() * n_k)[(0, 0)];
        let w_quad = (n_k.transpose() * w * n_k)[(0, 0)];
        root_sum += root_quad;
        ratio_sum += w_quad / root_quad;
    }
    let range_sum: f64 = split.range.iter().map(|(l, e)| (e.transpose() * w * e)[(0, 0)] / l).sum();

    let lower = 2.0 * sqrt_t * root_sum;
    let upper = sqrt_t * (ratio_sum + root_sum) + harmonic_sum(spec.horizon()) * range_sum;
    Ok((lower, upper))
}
