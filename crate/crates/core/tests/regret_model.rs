mod common;

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use rand::Rng;
use regretlab::linalg::{project_psd, psd_sqrt, PsdMatrix, SymMatrix};
use regretlab::regret_model::*;

use common::*;

#[test]
fn lazy_regret_matches_zero_schedule() {
    let mut rng = rng(101);
    for i in 0..50 {
        let n = 1 + i % 3;
        let horizon = rng.random_range(1..200);
        let c = rng.random_range(0.1..3.0);
        let spec = spec_with_c(&mut rng, n, horizon, c);
        let direct = evaluate_schedule(&spec, &ExcitationSchedule::zeros(n, spec.horizon())).unwrap();
        assert_relative_eq!(lazy_regret(&spec).unwrap(), direct, max_relative = 1e-11);
    }
}

#[test]
fn c_t_is_frame_invariant() {
    let mut rng = rng(102);
    for i in 0..50 {
        let n = 1 + i % 4;
        let horizon = rng.random_range(1..500);
        let spec = RegretModelSpec::new(
            random_spd(&mut rng, n, 0.1),
            random_spd(&mut rng, n, 0.2),
            random_spd(&mut rng, n, 0.1),
            horizon,
        )
        .unwrap();
        let (normalized, _) = normalize_spec(&spec).unwrap();
        assert_relative_eq!(compute_c_t(&spec).unwrap(), compute_c_t(&normalized).unwrap(), max_relative = 1e-9);
    }
}

#[test]
fn normalization_round_trip() {
    let mut rng = rng(103);
    for n in 1..=4 {
        let z = random_spd(&mut rng, n, 0.5);
        let norm = Normalization::symmetric(&z).unwrap();
        let x = random_spd(&mut rng, n, 0.0);
        let back = norm.backward(&norm.forward(&x));
        assert!((back.as_matrix() - x.as_matrix()).amax() < 1e-12);
        // V Z V = I for the symmetric root
        let zz = norm.forward(&z);
        assert!((zz.as_matrix() - DMatrix::<f64>::identity(n, n)).amax() < 1e-12);
    }
}

#[test]
fn normalized_identity_z_is_unchanged() {
    let spec = RegretModelSpec::new(
        PsdMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap(),
        PsdMatrix::identity(2),
        PsdMatrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 0.3]]).unwrap(),
        9,
    )
    .unwrap();
    let (n, norm) = normalize_spec(&spec).unwrap();
    assert!((norm.factor() - DMatrix::<f64>::identity(2, 2)).amax() < 1e-15);
    assert!((n.w().as_matrix() - spec.w().as_matrix()).amax() < 1e-15);
    assert!((n.s().as_matrix() - spec.s().as_matrix()).amax() < 1e-15);
}

#[test]
fn excitation_never_increases_information_cost() {
    let mut rng = rng(104);
    for i in 0..40 {
        let n = 1 + i % 3;
        let spec = spec_with_c(&mut rng, n, 12, 0.5);
        let base = ExcitationSchedule::pulse(random_spd(&mut rng, n, 0.0), 12);
        let mut bumped_steps = base.steps().to_vec();
        let when = rng.random_range(0..12);
        bumped_steps[when] = bumped_steps[when].add(&random_spd(&mut rng, n, 0.0));
        let bumped = ExcitationSchedule::new(bumped_steps).unwrap();
        // compare only the tr(W I_t^-1) parts: strip the power term by using
        // per-step information costs
        let info_cost = |sched: &ExcitationSchedule| -> Vec<f64> {
            let mut cum = DMatrix::<f64>::zeros(n, n);
            sched
                .steps()
                .iter()
                .enumerate()
                .map(|(k, x)| {
                    cum += x.as_matrix();
                    let info = spec.s().as_matrix() * (k + 1) as f64 + &cum;
                    (spec.w().as_matrix() * info.try_inverse().unwrap()).trace()
                })
                .collect()
        };
        for (a, b) in info_cost(&base).iter().zip(info_cost(&bumped)) {
            assert!(b <= a + 1e-12 * a.abs());
        }
    }
}

#[test]
fn moving_excitation_later_never_helps() {
    let mut rng = rng(105);
    for i in 0..100 {
        let n = 1 + i % 3;
        let spec = match i % 3 {
            0 => case1_spec(&mut rng, n),
            1 => case2_spec(&mut rng, n),
            _ => case3_spec(&mut rng, n, false),
        };
        let horizon = spec.horizon().max(2);
        let spec = spec.with_horizon(horizon).unwrap();
        let sol = solve_problem_one(&spec).unwrap();
        let best = evaluate_schedule(&spec, &sol.schedule(horizon)).unwrap();
        for &eps in &[1e-3, 1e-1] {
            // shift eps*I from t=1 to t=2, keeping t=1 PSD
            let shifted = project_psd(&sol.x1.sym().sub(&SymMatrix::identity(n).scale(eps)));
            let moved = sol.x1.sym().sub(shifted.sym());
            let mut steps = sol.schedule(horizon).steps().to_vec();
            steps[0] = shifted;
            steps[1] = PsdMatrix::new(moved).unwrap();
            if let Ok(r) = evaluate_schedule(&spec, &ExcitationSchedule::new(steps).unwrap()) {
                assert!(r >= best - 1e-9 * best.abs(), "spec {i}: moved {r} < optimum {best}");
            }
        }
    }
}

#[test]
fn lazy_is_optimal_in_case_one() {
    let mut rng = rng(106);
    for i in 0..6 {
        let n = 1 + i % 3;
        let spec = case1_spec(&mut rng, n);
        let lazy = evaluate_schedule(&spec, &ExcitationSchedule::zeros(n, spec.horizon())).unwrap();
        for _ in 0..1000 {
            let scale = 10f64.powf(rng.random_range(-4.0..1.0));
            let x = random_spd(&mut rng, n, 0.0).scale(scale);
            let r = evaluate_schedule(&spec, &ExcitationSchedule::pulse(x, spec.horizon())).unwrap();
            assert!(lazy <= r * (1.0 + 1e-12));
        }
    }
}

#[test]
fn solution_does_not_depend_on_square_root_factor() {
    let mut rng = rng(107);
    for i in 0..30 {
        let n = 2 + i % 2;
        let spec = if i % 2 == 0 { case2_spec(&mut rng, n) } else { case3_spec(&mut rng, n, false) };
        let v = Normalization::symmetric(spec.z()).unwrap().factor().clone();
        let rotated = Normalization::from_factor(spec.z(), &v * random_orthogonal(&mut rng, n)).unwrap();
        let opts = SolverOptions { tolerance: 1e-11, ..SolverOptions::default() };
        let second = solve_problem_one_in_frame(&spec, &rotated, &opts).unwrap();
        let first_tight = solve_problem_one_with(&spec, &opts).unwrap();
        let diff = (first_tight.x1.as_matrix() - second.x1.as_matrix()).amax();
        let scale = first_tight.x1.as_matrix().amax().max(1.0);
        assert!(diff <= 1e-8 * scale, "spec {i}: frames disagree by {diff:e}");
    }
}

#[test]
fn bounds_bracket_random_solutions() {
    let mut rng = rng(108);
    for i in 0..100 {
        let n = 1 + i % 3;
        let spec = case2_spec(&mut rng, n);
        let sol = solve_problem_one(&spec).unwrap();
        assert_eq!(sol.case, Case::ImmediateFullRank);
        assert!(sol.within_bounds(), "case 2 spec {i}: {sol:?}");
        let spec = case3_spec(&mut rng, n, i % 4 == 0);
        let sol = solve_problem_one(&spec).unwrap();
        assert_eq!(sol.case, Case::ImmediateSingular);
        assert!(sol.within_bounds(), "case 3 spec {i}: {sol:?}");
    }
}

#[test]
fn solver_matches_scalar_oracle() {
    let mut rng = rng(109);
    for i in 0..60 {
        let horizon = rng.random_range(1..400);
        let w = rng.random_range(0.05..5.0);
        let z = rng.random_range(0.2..5.0);
        let s = match i % 3 {
            0 => 0.0,
            _ => rng.random_range(0.01..3.0),
        };
        let spec = RegretModelSpec::scalar(w, z, s, horizon).unwrap();
        let sol = solve_problem_one(&spec).unwrap();
        let (_, best) = golden_section_scalar(w, z, s, horizon);
        assert_relative_eq!(sol.regret, best, max_relative = 1e-6);
    }
}

#[test]
fn zero_noise_regret_scales_with_sqrt_t() {
    let w = PsdMatrix::from_rows(&[vec![2.0, 0.4], vec![0.4, 1.0]]).unwrap();
    let root_trace = psd_sqrt(&w).trace();
    for &t in &[1usize, 7, 100, 2500] {
        let spec = RegretModelSpec::new(w.clone(), PsdMatrix::identity(2), PsdMatrix::zeros(2), t).unwrap();
        let sol = solve_problem_one(&spec).unwrap();
        assert_relative_eq!(sol.regret / (t as f64).sqrt(), 2.0 * root_trace, max_relative = 1e-14);
    }
}
