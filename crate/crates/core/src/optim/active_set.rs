//! Dual active-set method (Goldfarb–Idnani) for strictly convex QPs.
//!
//! Used when the interior-point method stalls, typically on problems whose
//! feasible set has no interior. Everything is recomputed densely at each
//! step; the problems are small.

use nalgebra::{DMatrix, DVector};

use super::ipm::kkt_residuals;
use super::{SolveResult, SolveStatus};

struct Active {
    /// Row normal in `n·x ≥ b` form.
    n: DVector<f64>,
    b: f64,
    /// `Some(i)` for inequality row `i`, `None` for equalities.
    row: Option<usize>,
    /// Sign applied to an equality row to put it in `≥` form.
    sign: f64,
    eq_index: usize,
    u: f64,
}

/// `None` when `p` is not positive definite.
#[allow(clippy::too_many_arguments)]
pub(super) fn solve(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    g_mat: &DMatrix<f64>,
    g: &DVector<f64>,
    f_mat: &DMatrix<f64>,
    f: &DVector<f64>,
    tol: f64,
) -> Option<SolveResult> {
    let n = q.len();
    let ginv = p.clone().cholesky()?.inverse();
    let mut x = -(&ginv * q);
    let mut active: Vec<Active> = Vec::new();
    let mut iterations = 0usize;
    let cap = 50 * (n + g.len() + f.len()).max(1);

    // Equalities first; they are never dropped.
    for e in 0..f.len() {
        let row = f_mat.row(e).transpose();
        if row.norm() <= 1e-14 {
            continue;
        }
        let s = row.dot(&x) - f[e];
        let sign = if s > 0.0 { -1.0 } else { 1.0 };
        let cand = Active { n: row * sign, b: f[e] * sign, row: None, sign, eq_index: e, u: 0.0 };
        match add_constraint(&ginv, &mut x, &mut active, cand, &mut iterations, cap, true) {
            Step::Added => {}
            Step::Infeasible => return Some(infeasible(n, g.len(), f.len(), iterations)),
            Step::Stalled => return None,
        }
    }

    loop {
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..g.len() {
            if active.iter().any(|a| a.row == Some(i)) {
                continue;
            }
            let row = g_mat.row(i);
            let norm = row.norm();
            if norm <= 1e-14 {
                if g[i] < -tol {
                    return Some(infeasible(n, g.len(), f.len(), iterations));
                }
                continue;
            }
            let viol = ((row * &x)[0] - g[i]) / norm;
            let slack = 1e-12 * (1.0 + (g[i] / norm).abs() + x.amax());
            if viol > slack && worst.is_none_or(|(_, v)| viol > v) {
                worst = Some((i, viol));
            }
        }
        let Some((i, _)) = worst else { break };
        let cand = Active { n: -g_mat.row(i).transpose(), b: -g[i], row: Some(i), sign: 1.0, eq_index: 0, u: 0.0 };
        match add_constraint(&ginv, &mut x, &mut active, cand, &mut iterations, cap, false) {
            Step::Added => {}
            Step::Infeasible => return Some(infeasible(n, g.len(), f.len(), iterations)),
            Step::Stalled => return None,
        }
    }

    let mut z = DVector::zeros(g.len());
    let mut y = DVector::zeros(f.len());
    for a in &active {
        match a.row {
            Some(i) => z[i] = a.u.max(0.0),
            None => y[a.eq_index] = -a.u * a.sign,
        }
    }
    let (residuals, objective) = kkt_residuals(p, q, g_mat, g, f_mat, f, &x, &z, &y);
    Some(SolveResult {
        status: SolveStatus::Optimal,
        x,
        z_ineq: z,
        y_eq: y,
        objective,
        residuals,
        iterations,
        certificate: None,
    })
}

enum Step {
    Added,
    Infeasible,
    Stalled,
}

/// Primal and dual step directions for adding `np` to the active set.
fn directions(ginv: &DMatrix<f64>, active: &[Active], np: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
    let hn = ginv * np;
    if active.is_empty() {
        return Some((hn, DVector::zeros(0)));
    }
    let k = active.len();
    let nmat = DMatrix::from_fn(np.len(), k, |r, c| active[c].n[r]);
    let hnmat = ginv * &nmat;
    let gram = nmat.transpose() * &hnmat;
    let r = gram.lu().solve(&(nmat.transpose() * &hn))?;
    let z = hn - hnmat * &r;
    Some((z, r))
}

fn add_constraint(
    ginv: &DMatrix<f64>,
    x: &mut DVector<f64>,
    active: &mut Vec<Active>,
    mut cand: Active,
    iterations: &mut usize,
    cap: usize,
    equality: bool,
) -> Step {
    loop {
        *iterations += 1;
        if *iterations > cap {
            return Step::Stalled;
        }
        let s = cand.n.dot(x) - cand.b;
        if s >= 0.0 && !equality {
            active.push(cand);
            return Step::Added;
        }
        let Some((z, r)) = directions(ginv, active, &cand.n) else {
            return Step::Stalled;
        };
        // Partial step: the first active inequality whose multiplier hits zero.
        let mut t1 = f64::INFINITY;
        let mut drop = None;
        for (j, a) in active.iter().enumerate() {
            if a.row.is_some() && r[j] > 1e-14 {
                let t = a.u / r[j];
                if t < t1 {
                    t1 = t;
                    drop = Some(j);
                }
            }
        }
        let zn = z.dot(&cand.n);
        let zero_step = z.norm() <= 1e-12 * (ginv * &cand.n).norm().max(1e-300) || zn <= 0.0;
        let t2 = if zero_step { f64::INFINITY } else { -s / zn };
        let t = t1.min(t2);
        if !t.is_finite() {
            return Step::Infeasible;
        }
        if !zero_step {
            *x += &z * t;
        }
        for (j, a) in active.iter_mut().enumerate() {
            a.u -= t * r[j];
        }
        cand.u += t;
        if t2 <= t1 {
            if equality {
                // Land exactly on the equality.
                let s = cand.n.dot(x) - cand.b;
                if s.abs() > 0.0 && !zero_step {
                    *x -= &z * (s / zn);
                }
            }
            active.push(cand);
            return Step::Added;
        }
        active.remove(drop.expect("finite partial step"));
    }
}

fn infeasible(n: usize, mi: usize, me: usize, iterations: usize) -> SolveResult {
    SolveResult {
        status: SolveStatus::Infeasible,
        x: DVector::zeros(n),
        z_ineq: DVector::zeros(mi),
        y_eq: DVector::zeros(me),
        objective: f64::INFINITY,
        residuals: super::Residuals { primal: f64::INFINITY, dual: 0.0, gap: 0.0 },
        iterations,
        certificate: None,
    }
}
