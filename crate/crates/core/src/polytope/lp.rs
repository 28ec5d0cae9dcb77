//! `max cᵀx s.t. Ax ≤ b` for the geometry layer.
//!
//! The interior-point answer is snapped onto its active face when the
//! active rows certify optimality, which makes support values exact to
//! roughly machine precision instead of solver tolerance.

use nalgebra::{DMatrix, DVector};

use super::{PolytopeError, Result};
use crate::optim::{self, LinearProgram, SolveStatus};

#[derive(Debug, Clone)]
pub(crate) enum LpMax {
    Finite { value: f64, x: DVector<f64> },
    Unbounded,
    Infeasible,
}

pub(crate) fn maximize(c: &[f64], a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Result<LpMax> {
    let n = c.len();
    let cost = DVector::from_iterator(n, c.iter().map(|v| -v));
    let lp = LinearProgram::new(cost, a.clone(), b.clone());
    let r = optim::solve_lp(&lp, tol)?;
    match r.status {
        SolveStatus::Optimal => {
            if let Some((value, x)) = polish(c, a, b, &r.x, &r.z_ineq) {
                return Ok(LpMax::Finite { value, x });
            }
            Ok(LpMax::Finite { value: -r.objective, x: r.x })
        }
        SolveStatus::Unbounded => Ok(LpMax::Unbounded),
        SolveStatus::Infeasible => Ok(LpMax::Infeasible),
        SolveStatus::IterationLimit => match polish(c, a, b, &r.x, &r.z_ineq) {
            Some((value, x)) => Ok(LpMax::Finite { value, x }),
            None => Err(PolytopeError::SolverFailure("LP iteration limit")),
        },
    }
}

/// Tries to recover an optimal vertex from an approximate primal/dual pair.
fn polish(
    c: &[f64],
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x: &DVector<f64>,
    z: &DVector<f64>,
) -> Option<(f64, DVector<f64>)> {
    let n = c.len();
    let m = a.nrows();
    if n == 0 || m == 0 {
        return None;
    }
    let scale = 1.0 + b.amax() + x.amax();
    let slack: Vec<f64> = (0..m)
        .map(|i| {
            let norm = a.row(i).norm().max(1e-300);
            (b[i] - a.row(i).dot(&x.transpose())) / norm
        })
        .collect();
    let mut by_activity: Vec<usize> = (0..m).collect();
    by_activity.sort_by(|&i, &j| {
        let ai = z[i] / (z[i] + slack[i].max(0.0) + 1e-300);
        let aj = z[j] / (z[j] + slack[j].max(0.0) + 1e-300);
        aj.total_cmp(&ai)
    });
    let mut by_slack: Vec<usize> = (0..m).collect();
    by_slack.sort_by(|&i, &j| slack[i].total_cmp(&slack[j]));

    for order in [&by_activity, &by_slack] {
        if let Some(r) = try_basis(c, a, b, x, order, &slack, scale) {
            return Some(r);
        }
    }
    None
}

/// Picks up to `n` independent near-active rows in `order`. When the
/// objective is a nonnegative combination `c = A_Bᵀ z_B` of them, `z_Bᵀ b_B`
/// bounds the maximum from above and is attained by `x` projected onto the
/// face `A_B x = b_B` if that projection is feasible.
fn try_basis(
    c: &[f64],
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x: &DVector<f64>,
    order: &[usize],
    slack: &[f64],
    scale: f64,
) -> Option<(f64, DVector<f64>)> {
    let n = c.len();
    let mut basis: Vec<usize> = Vec::with_capacity(n);
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(n);
    for &i in order {
        if basis.len() == n {
            break;
        }
        if slack[i] > 1e-6 * scale {
            continue;
        }
        let row = a.row(i).transpose();
        let norm = row.norm();
        if norm == 0.0 {
            continue;
        }
        let mut v = row / norm;
        for q in &ortho {
            let d = q.dot(&v);
            v -= q * d;
        }
        let rn = v.norm();
        if rn > 1e-7 {
            ortho.push(v / rn);
            basis.push(i);
        }
    }
    if basis.is_empty() {
        return None;
    }
    let k = basis.len();
    let ab = DMatrix::from_fn(k, n, |r, j| a[(basis[r], j)]);
    let bb = DVector::from_fn(k, |r, _| b[basis[r]]);
    let cv = DVector::from_column_slice(c);
    let gram = &ab * ab.transpose();
    let gram_lu = gram.lu();
    let zb = gram_lu.solve(&(&ab * &cv))?;
    let resid = ab.transpose() * &zb - &cv;
    if !zb.iter().all(|v| v.is_finite()) || resid.amax() > 1e-10 * (1.0 + cv.amax()) {
        return None;
    }
    if zb.iter().any(|v| *v < -1e-10 * (1.0 + cv.amax())) {
        return None;
    }
    let corr = gram_lu.solve(&(&bb - &ab * x))?;
    let xp = x + ab.transpose() * corr;
    if !xp.iter().all(|v| v.is_finite()) {
        return None;
    }
    let feas_tol = 1e-10 * (scale + xp.amax());
    for i in 0..a.nrows() {
        if a.row(i).dot(&xp.transpose()) - b[i] > feas_tol * (1.0 + a.row(i).norm()) {
            return None;
        }
    }
    Some((zb.dot(&bb), xp))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_is_exact() {
        // max x + y on the unit square
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
        let b = DVector::from_column_slice(&[1.0, 1.0, 0.0, 0.0]);
        match maximize(&[1.0, 1.0], &a, &b, 1e-8).unwrap() {
            LpMax::Finite { value, x } => {
                assert!((value - 2.0).abs() < 1e-14);
                assert!((x - DVector::from_element(2, 1.0)).amax() < 1e-14);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn face_optimum_still_certified() {
        // max x on the unit square: optimal face is an edge
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
        let b = DVector::from_column_slice(&[1.0, 1.0, 0.0, 0.0]);
        match maximize(&[1.0, 0.0], &a, &b, 1e-8).unwrap() {
            LpMax::Finite { value, .. } => assert!((value - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
