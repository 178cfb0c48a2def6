//! Compares lazy, pulse and decaying schedules under the regret model as the
//! horizon grows.

use regretlab::linalg::PsdMatrix;
use regretlab::regret_model::{evaluate_schedule, solve_problem_one, ExcitationSchedule, RegretModelSpec};

fn main() -> regretlab::Result<()> {
    let w = PsdMatrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 0.5]])?;
    let s = PsdMatrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.0]])?;
    let alphas: Vec<f64> = (0..20).map(|k| 10f64.powf(-3.0 + 5.0 * k as f64 / 19.0)).collect();
    println!("{:>8} {:>12} {:>12} {:>10}", "T", "pulse", "decaying", "alpha*");
    for horizon in [10, 100, 1000, 10_000] {
        let spec = RegretModelSpec::new(w.clone(), PsdMatrix::identity(2), s.clone(), horizon)?;
        let pulse = solve_problem_one(&spec)?.regret;
        let (alpha, decaying) = alphas
            .iter()
            .filter_map(|&a| {
                let sched = ExcitationSchedule::decaying(a, &PsdMatrix::identity(2), horizon);
                evaluate_schedule(&spec, &sched).ok().map(|r| (a, r))
            })
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("some alpha is feasible");
        println!("{horizon:>8} {pulse:>12.4} {decaying:>12.4} {alpha:>10.3e}");
    }
    Ok(())
}
