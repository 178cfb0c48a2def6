//! Solves the exploration-design problem for a few instances and prints the
//! case, the optimal pulse and the regret bounds.

use regretlab::linalg::PsdMatrix;
use regretlab::regret_model::{lazy_regret, solve_problem_one, RegretModelSpec};

fn main() -> regretlab::Result<()> {
    let specs = [
        ("scalar, noisy", RegretModelSpec::scalar(1.0, 1.0, 5.0, 1000)?),
        ("scalar, quiet", RegretModelSpec::scalar(1.0, 1.0, 0.2, 1000)?),
        ("scalar, S = 0", RegretModelSpec::scalar(4.0, 1.0, 0.0, 100)?),
        (
            "2x2, rank-one S",
            RegretModelSpec::new(
                PsdMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]])?,
                PsdMatrix::identity(2),
                PsdMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]])?,
                1000,
            )?,
        ),
    ];
    for (name, spec) in &specs {
        let sol = solve_problem_one(spec)?;
        println!("{name}: {}", sol.case.label());
        if let Some(c) = sol.c_t {
            println!("  c_T = {c:.6}");
        }
        println!("  x1 = {:?}", sol.x1.sym().to_rows());
        println!("  regret = {:.6}  in [{:.6}, {:.6}]", sol.regret, sol.lower_bound, sol.upper_bound);
        if sol.case.is_lazy() {
            println!("  lazy regret = {:.6}", lazy_regret(spec)?);
        }
    }
    Ok(())
}
