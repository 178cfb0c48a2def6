//! Shared generators and independent oracles for the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regretlab::linalg::{PsdMatrix, SymMatrix};
use regretlab::regret_model::{compute_c_t, RegretModelSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `G G^T + floor I` with `G` uniform in `[-1, 1]`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> PsdMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let m = &g * g.transpose() + DMatrix::identity(n, n) * floor;
    PsdMatrix::new(SymMatrix::symmetrized(m)).unwrap()
}

pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    g.qr().q()
}

/// Random instance with `S > 0`, rescaled so that `c_T` equals `target_c`.
pub fn spec_with_c(rng: &mut ChaCha8Rng, n: usize, horizon: usize, target_c: f64) -> RegretModelSpec {
    let w = random_spd(rng, n, 0.1);
    let z = random_spd(rng, n, 0.2);
    let s = random_spd(rng, n, 0.1);
    let base = RegretModelSpec::new(w.clone(), z.clone(), s.clone(), horizon).unwrap();
    let c = compute_c_t(&base).unwrap();
    // c_T scales with the square of S
    let k = (target_c / c).sqrt();
    RegretModelSpec::new(w, z, s.scale(k), horizon).unwrap()
}

pub fn case1_spec(rng: &mut ChaCha8Rng, n: usize) -> RegretModelSpec {
    let horizon = rng.random_range(1..=300);
    let c = rng.random_range(1.0..4.0);
    spec_with_c(rng, n, horizon, c)
}

pub fn case2_spec(rng: &mut ChaCha8Rng, n: usize) -> RegretModelSpec {
    let horizon = rng.random_range(2..=300);
    let c = rng.random_range(0.02..0.98);
    spec_with_c(rng, n, horizon, c)
}

/// Singular `S`: zero, or rank one when `n > 1`.
pub fn case3_spec(rng: &mut ChaCha8Rng, n: usize, zero_s: bool) -> RegretModelSpec {
    let horizon = rng.random_range(1..=300);
    let w = random_spd(rng, n, 0.1);
    let z = random_spd(rng, n, 0.2);
    let s = if zero_s || n == 1 {
        PsdMatrix::zeros(n)
    } else {
        let v = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
        let scale = rng.random_range(0.01..5.0);
        PsdMatrix::new(SymMatrix::symmetrized(&v * v.transpose() * scale)).unwrap()
    };
    RegretModelSpec::new(w, z, s, horizon).unwrap()
}

/// Scalar objective `sum_t w / (t s + x) + x / z`, summed directly.
pub fn scalar_objective(w: f64, z: f64, s: f64, horizon: usize, x: f64) -> f64 {
    let mut total = x / z;
    for t in (1..=horizon).rev() {
        total += w / (t as f64 * s + x);
    }
    total
}

/// Golden-section minimization of the scalar objective over
/// `[0, 10 sqrt(T w z)]`; returns `(argmin, min)`.
pub fn golden_section_scalar(w: f64, z: f64, s: f64, horizon: usize) -> (f64, f64) {
    let f = |x: f64| scalar_objective(w, z, s, horizon, x);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0_f64, 10.0 * (horizon as f64 * w * z).sqrt());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..300 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        if b - a < 1e-15 * b.max(1e-300) {
            break;
        }
    }
    // the lazy endpoint is not an interior probe
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    if s > 0.0 {
        let at_zero = f(0.0);
        if at_zero <= best.1 {
            best = (0.0, at_zero);
        }
    }
    best
}
