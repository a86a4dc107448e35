//! The dense QP solver on three small problems with known answers:
//! an unconstrained projection, a clipped one-dimensional minimum with its
//! multiplier, and a simplex-constrained least norm.

use nalgebra::{DMatrix, DVector};
use ofo::qp::{kkt_residual, solve_qp, QpProblem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // min ||x + c||^2: lands on -c.
    let c = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    let problem = QpProblem::new(DMatrix::identity(3, 3) * 2.0, &c * 2.0);
    let sol = solve_qp(&problem)?;
    println!("unconstrained:   x = {:.3?}", sol.x.as_slice());

    // min (x - 2)^2 s.t. x <= 1: clips at the bound, multiplier 2.
    let problem = QpProblem::new(
        DMatrix::from_element(1, 1, 2.0),
        DVector::from_element(1, -4.0),
    )
    .with_inequalities(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 1.0));
    let sol = solve_qp(&problem)?;
    println!(
        "clipped:         x = {:.3}, lambda = {:.3}, kkt residual {:.1e}",
        sol.x[0],
        sol.lambda[0],
        kkt_residual(&problem, &sol)
    );

    // min ||x||^2 s.t. sum x = 1: the uniform point by symmetry.
    let problem = QpProblem::new(DMatrix::identity(3, 3) * 2.0, DVector::zeros(3))
        .with_equalities(DMatrix::from_element(1, 3, 1.0), DVector::from_element(1, 1.0));
    let sol = solve_qp(&problem)?;
    println!("simplex center:  x = {:.3?}", sol.x.as_slice());

    Ok(())
}
