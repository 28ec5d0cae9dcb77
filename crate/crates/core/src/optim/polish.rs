//! Active-set refinement of an interior-point QP optimum.

use nalgebra::{DMatrix, DVector};

use super::ipm::kkt_residuals;
use super::SolveResult;

/// Re-solves the equality-constrained QP on the rows the IPM marks active.
/// Returns `None` unless the result is feasible to rounding, has
/// nonnegative multipliers and is no worse than the input.
#[allow(clippy::too_many_arguments)]
pub(super) fn refine(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    g_mat: &DMatrix<f64>,
    g: &DVector<f64>,
    f_mat: &DMatrix<f64>,
    f: &DVector<f64>,
    res: &SolveResult,
    tol: f64,
) -> Option<SolveResult> {
    let n = q.len();
    let x = &res.x;
    let slack = g - g_mat * x;

    let mut cand: Vec<(usize, f64)> = Vec::new();
    for i in 0..g.len() {
        let norm = g_mat.row(i).norm();
        if norm <= 1e-14 {
            continue;
        }
        let s = slack[i] / norm;
        let z = res.z_ineq[i] * norm;
        if s <= 1e-5 * (1.0 + (g[i] / norm).abs()) && z >= s {
            cand.push((i, z));
        }
    }
    cand.sort_by(|a, b| b.1.total_cmp(&a.1));

    // Greedy independent subset, equalities first.
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut take = |row: DVector<f64>| -> bool {
        let norm = row.norm();
        if norm <= 1e-14 || basis.len() >= n {
            return false;
        }
        let mut r = row / norm;
        for b in &basis {
            let c = r.dot(b);
            r -= b * c;
        }
        let rn = r.norm();
        if rn <= 1e-9 {
            return false;
        }
        basis.push(r / rn);
        true
    };
    let eq_rows: Vec<usize> = (0..f.len()).filter(|&e| take(f_mat.row(e).transpose())).collect();
    let in_rows: Vec<usize> = cand.iter().map(|c| c.0).filter(|&i| take(g_mat.row(i).transpose())).collect();

    let k = eq_rows.len() + in_rows.len();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    let mut rhs = DVector::zeros(n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(p);
    rhs.rows_mut(0, n).copy_from(&(-q));
    for (j, (row, b)) in eq_rows
        .iter()
        .map(|&e| (f_mat.row(e), f[e]))
        .chain(in_rows.iter().map(|&i| (g_mat.row(i), g[i])))
        .enumerate()
    {
        for c in 0..n {
            kkt[(n + j, c)] = row[c];
            kkt[(c, n + j)] = row[c];
        }
        rhs[n + j] = b;
    }
    let sol = kkt.clone().lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) || (&kkt * &sol - &rhs).amax() > 1e-9 * (1.0 + rhs.amax()) {
        return None;
    }

    let xp = sol.rows(0, n).into_owned();
    let mut y = DVector::zeros(f.len());
    for (j, &e) in eq_rows.iter().enumerate() {
        y[e] = sol[n + j];
    }
    let mut z = DVector::zeros(g.len());
    let zscale = 1.0 + res.z_ineq.amax();
    for (j, &i) in in_rows.iter().enumerate() {
        let v = sol[n + eq_rows.len() + j];
        if v < -1e-9 * zscale {
            return None;
        }
        z[i] = v.max(0.0);
    }

    let gx = g_mat * &xp;
    for i in 0..g.len() {
        if gx[i] - g[i] > 1e-12 * (1.0 + g[i].abs() + g_mat.row(i).norm() * xp.amax()) {
            return None;
        }
    }
    let (resid, obj) = kkt_residuals(p, q, g_mat, g, f_mat, f, &xp, &z, &y);
    if resid.primal > tol || resid.dual > tol || resid.gap > tol {
        return None;
    }
    if obj > res.objective + tol * (1.0 + res.objective.abs()) {
        return None;
    }
    Some(SolveResult {
        x: xp,
        z_ineq: z,
        y_eq: y,
        objective: obj,
        residuals: resid,
        ..res.clone()
    })
}
