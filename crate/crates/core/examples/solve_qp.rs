//! Small LP and QP solved with the interior-point solver.

use msh::optim::{solve_lp, solve_qp, LinearProgram, QuadraticProgram};
use nalgebra::{DMatrix, DVector};

fn main() {
    // max x + y over the unit simplex scaled by 2.
    let lp = LinearProgram::new(
        DVector::from_vec(vec![-1.0, -1.0]),
        DMatrix::from_row_slice(3, 2, &[1.0, 1.0, -1.0, 0.0, 0.0, -1.0]),
        DVector::from_vec(vec![2.0, 0.0, 0.0]),
    );
    let r = solve_lp(&lp, 1e-9).expect("valid LP");
    println!("LP  status={:?} objective={:.6} iterations={}", r.status, r.objective, r.iterations);

    // Projection of (3, 3) onto {x + y ≤ 1, x ≤ 0.25}.
    let qp = QuadraticProgram::new(
        DMatrix::identity(2, 2) * 2.0,
        DVector::from_vec(vec![-6.0, -6.0]),
        DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]),
        DVector::from_vec(vec![1.0, 0.25]),
    );
    let r = solve_qp(&qp, 1e-9).expect("valid QP");
    println!("QP  status={:?} x=({:.6}, {:.6}) multipliers={:?}", r.status, r.x[0], r.x[1], r.z_ineq.as_slice());
    println!("    residuals {:?}", r.residuals);
}
