//! Homogeneous self-dual interior-point method for convex QPs (LPs are the
//! `P = 0` case).
//!
//! The embedding follows the quadratic HSD formulation:
//!
//! ```text
//!   P x + Gᵀz + Fᵀy + q τ = 0
//!   G x + s − g τ          = 0
//!   F x − f τ              = 0
//!   qᵀx + gᵀz + fᵀy + xᵀPx/τ + κ = 0,    s, z, τ, κ ≥ 0
//! ```
//!
//! Each Newton system is reduced to the `(n + m_eq)` saddle system
//! `[P + GᵀW⁻¹G, Fᵀ; F, 0]` and solved twice per iteration (one extra solve
//! for the τ column). Rows of `G` and `F` are scaled to unit norm internally.

use nalgebra::{DMatrix, DVector};

use super::{Certificate, Residuals, SolveResult, SolveStatus, SolverSettings};

struct Problem {
    n: usize,
    p: Vec<f64>, // n×n row-major
    q: Vec<f64>,
    ai: Vec<f64>, // mi×n row-major, unit rows
    bi: Vec<f64>,
    ae: Vec<f64>,
    be: Vec<f64>,
    mi: usize,
    me: usize,
    has_p: bool,
}

impl Problem {
    fn row_i(&self, i: usize) -> &[f64] {
        &self.ai[i * self.n..(i + 1) * self.n]
    }
    fn row_e(&self, i: usize) -> &[f64] {
        &self.ae[i * self.n..(i + 1) * self.n]
    }
    fn p_mul(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        if !self.has_p {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        for r in 0..n {
            out[r] = dot(&self.p[r * n..(r + 1) * n], x);
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Dense LU with partial pivoting, sized for the tiny saddle systems here.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Vec<f64>, n: usize) -> Option<Lu> {
        let mut piv = (0..n).collect::<Vec<_>>();
        for k in 0..n {
            let mut best = k;
            let mut best_val = a[piv[k] * n + k].abs();
            for r in (k + 1)..n {
                let v = a[piv[r] * n + k].abs();
                if v > best_val {
                    best = r;
                    best_val = v;
                }
            }
            if best_val == 0.0 || !best_val.is_finite() {
                return None;
            }
            piv.swap(k, best);
            let pk = piv[k];
            let diag = a[pk * n + k];
            for r in (k + 1)..n {
                let pr = piv[r];
                let f = a[pr * n + k] / diag;
                a[pr * n + k] = f;
                if f != 0.0 {
                    for c in (k + 1)..n {
                        a[pr * n + c] -= f * a[pk * n + c];
                    }
                }
            }
        }
        Some(Lu { n, lu: a, piv })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for k in 0..n {
            let pk = self.piv[k];
            let mut v = b[pk];
            for c in 0..k {
                v -= self.lu[pk * n + c] * y[c];
            }
            y[k] = v;
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let pk = self.piv[k];
            let mut v = y[k];
            for c in (k + 1)..n {
                v -= self.lu[pk * n + c] * x[c];
            }
            x[k] = v / self.lu[pk * n + k];
        }
        x
    }
}

struct Kkt<'a> {
    prob: &'a Problem,
    winv: Vec<f64>, // z/s per inequality row
    lu: Lu,
    exact: Vec<f64>, // unregularised reduced matrix for refinement
    dim: usize,
}

impl<'a> Kkt<'a> {
    fn new(prob: &'a Problem, s: &[f64], z: &[f64]) -> Option<Kkt<'a>> {
        let n = prob.n;
        let me = prob.me;
        let dim = n + me;
        let winv: Vec<f64> = s.iter().zip(z).map(|(s, z)| z / s).collect();
        let mut k = vec![0.0; dim * dim];
        if prob.has_p {
            for r in 0..n {
                for c in 0..n {
                    k[r * dim + c] = prob.p[r * n + c];
                }
            }
        }
        for i in 0..prob.mi {
            let a = prob.row_i(i);
            let w = winv[i];
            for r in 0..n {
                let ar = a[r] * w;
                if ar == 0.0 {
                    continue;
                }
                for c in 0..n {
                    k[r * dim + c] += ar * a[c];
                }
            }
        }
        for e in 0..me {
            let a = prob.row_e(e);
            for c in 0..n {
                k[(n + e) * dim + c] = a[c];
                k[c * dim + n + e] = a[c];
            }
        }
        let mut diag_max = 1.0f64;
        for r in 0..n {
            diag_max = diag_max.max(k[r * dim + r].abs());
        }
        let delta = 1e-11 * diag_max.min(1e10) + 1e-13;
        let mut reg = k.clone();
        for r in 0..n {
            reg[r * dim + r] += delta;
        }
        for e in 0..me {
            reg[(n + e) * dim + n + e] -= delta;
        }
        let lu = Lu::factor(reg, dim)?;
        Some(Kkt { prob, winv, lu, exact: k, dim })
    }

    /// Solves `[P Gᵀ Fᵀ; G −W 0; F 0 0] (dx, dz, dy) = (r1, r2, r3)`.
    fn solve(&self, r1: &[f64], r2: &[f64], r3: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let prob = self.prob;
        let n = prob.n;
        let dim = self.dim;
        let mut rhs = vec![0.0; dim];
        rhs[..n].copy_from_slice(r1);
        for i in 0..prob.mi {
            let f = self.winv[i] * r2[i];
            if f != 0.0 {
                let a = prob.row_i(i);
                for c in 0..n {
                    rhs[c] += a[c] * f;
                }
            }
        }
        rhs[n..].copy_from_slice(r3);
        let mut sol = self.lu.solve(&rhs);
        for _ in 0..3 {
            let mut res = rhs.clone();
            for r in 0..dim {
                res[r] -= dot(&self.exact[r * dim..(r + 1) * dim], &sol);
            }
            if inf_norm(&res) <= 1e-15 * (1.0 + inf_norm(&rhs)) {
                break;
            }
            let corr = self.lu.solve(&res);
            for (s, c) in sol.iter_mut().zip(&corr) {
                *s += c;
            }
        }
        let dx = sol[..n].to_vec();
        let dy = sol[n..].to_vec();
        let dz = (0..prob.mi)
            .map(|i| self.winv[i] * (dot(prob.row_i(i), &dx) - r2[i]))
            .collect();
        (dx, dz, dy)
    }
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    let mut a = f64::INFINITY;
    for (x, d) in v.iter().zip(dv) {
        if *d < 0.0 {
            a = a.min(-x / d);
        }
    }
    a
}

/// KKT residuals of `(x, z, y)` for `min ½xᵀPx + qᵀx s.t. Gx ≤ g, Fx = f`,
/// relative as documented on [`Residuals`]. Also returns the primal objective.
pub fn kkt_residuals(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    g_mat: &DMatrix<f64>,
    g: &DVector<f64>,
    f_mat: &DMatrix<f64>,
    f: &DVector<f64>,
    x: &DVector<f64>,
    z: &DVector<f64>,
    y: &DVector<f64>,
) -> (Residuals, f64) {
    let px = p * x;
    let xpx = x.dot(&px);
    let pobj = 0.5 * xpx + q.dot(x);
    let dobj = -0.5 * xpx - g.dot(z) - f.dot(y);
    let mut viol = 0.0f64;
    let gx = g_mat * x;
    for i in 0..g.len() {
        viol = viol.max(gx[i] - g[i]);
    }
    let fx = f_mat * x;
    for i in 0..f.len() {
        viol = viol.max((fx[i] - f[i]).abs());
    }
    let bnorm = g.amax().max(f.amax());
    let atz = g_mat.transpose() * z + f_mat.transpose() * y;
    let rd = &px + q + &atz;
    let dual_scale = 1.0 + q.amax().max(px.amax()).max(atz.amax());
    let res = Residuals {
        primal: viol.max(0.0) / (1.0 + bnorm),
        dual: rd.amax() / dual_scale,
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs().min(dobj.abs())),
    };
    (res, pobj)
}

#[allow(clippy::too_many_arguments)]
pub(super) fn solve(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    g_mat: &DMatrix<f64>,
    g: &DVector<f64>,
    f_mat: &DMatrix<f64>,
    f: &DVector<f64>,
    settings: &SolverSettings,
    is_lp: bool,
) -> SolveResult {
    let n = q.len();
    let tol = settings.tol;
    let mi_all = g.len();
    let me_all = f.len();

    // Presolve: normalise rows, drop or reject zero rows.
    let mut ai = Vec::new();
    let mut bi = Vec::new();
    let mut map_i = Vec::new();
    let mut scale_i = Vec::new();
    for r in 0..mi_all {
        let norm = g_mat.row(r).norm();
        if norm <= 1e-14 {
            if g[r] < -tol {
                let mut y = DVector::zeros(mi_all);
                y[r] = -1.0 / g[r];
                return trivial(n, mi_all, me_all, SolveStatus::Infeasible, Some(Certificate::PrimalInfeasible {
                    y_ineq: y,
                    y_eq: DVector::zeros(me_all),
                }));
            }
            continue;
        }
        ai.extend(g_mat.row(r).iter().map(|v| v / norm));
        bi.push(g[r] / norm);
        map_i.push(r);
        scale_i.push(norm);
    }
    let mut ae = Vec::new();
    let mut be = Vec::new();
    let mut map_e = Vec::new();
    let mut scale_e = Vec::new();
    for r in 0..me_all {
        let norm = f_mat.row(r).norm();
        if norm <= 1e-14 {
            if f[r].abs() > tol {
                let mut y = DVector::zeros(me_all);
                y[r] = -1.0 / f[r];
                return trivial(n, mi_all, me_all, SolveStatus::Infeasible, Some(Certificate::PrimalInfeasible {
                    y_ineq: DVector::zeros(mi_all),
                    y_eq: y,
                }));
            }
            continue;
        }
        ae.extend(f_mat.row(r).iter().map(|v| v / norm));
        be.push(f[r] / norm);
        map_e.push(r);
        scale_e.push(norm);
    }
    let mi = bi.len();
    let me = be.len();
    let mut pv = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            pv[r * n + c] = p[(r, c)];
        }
    }
    let has_p = !is_lp && pv.iter().any(|v| *v != 0.0);
    let prob = Problem {
        n,
        p: pv,
        q: q.iter().copied().collect(),
        ai,
        bi,
        ae,
        be,
        mi,
        me,
        has_p,
    };

    let max_iter = settings
        .max_iter
        .unwrap_or_else(|| (10 * n.max(1) * (mi_all + me_all).max(1)).max(50));

    let mut x = vec![0.0; n];
    let mut s = vec![1.0; mi];
    let mut z = vec![1.0; mi];
    let mut y = vec![0.0; me];
    let mut tau = 1.0f64;
    let mut kappa = 1.0f64;

    let unscale = |x: &[f64], z: &[f64], y: &[f64], tau: f64| {
        let xo = DVector::from_iterator(n, x.iter().map(|v| v / tau));
        let mut zo = DVector::zeros(mi_all);
        for (k, &r) in map_i.iter().enumerate() {
            zo[r] = z[k] / tau / scale_i[k];
        }
        let mut yo = DVector::zeros(me_all);
        for (k, &r) in map_e.iter().enumerate() {
            yo[r] = y[k] / tau / scale_e[k];
        }
        (xo, zo, yo)
    };

    let mut px = vec![0.0; n];
    let mut stall = 0usize;
    let mut last: Option<(DVector<f64>, DVector<f64>, DVector<f64>, Residuals, f64)> = None;
    let mut it = 0usize;
    while it <= max_iter {
        // Convergence and certificate checks on the current iterate.
        let (xo, zo, yo) = unscale(&x, &z, &y, tau);
        let (res, pobj) = kkt_residuals(p, q, g_mat, g, f_mat, f, &xo, &zo, &yo);
        if res.primal <= tol && res.dual <= tol && res.gap <= tol {
            return SolveResult {
                status: SolveStatus::Optimal,
                x: xo,
                z_ineq: zo,
                y_eq: yo,
                objective: pobj,
                residuals: res,
                iterations: it,
                certificate: None,
            };
        }
        if let Some(cert) = primal_infeasibility(&prob, &z, &y, tol, &map_i, &scale_i, &map_e, &scale_e, mi_all, me_all, g_mat, g, f_mat, f) {
            let mut r = trivial(n, mi_all, me_all, SolveStatus::Infeasible, Some(cert));
            r.iterations = it;
            return r;
        }
        if let Some(ray) = dual_infeasibility(&prob, &x, tol, p, g_mat, f_mat) {
            let mut r = trivial(n, mi_all, me_all, SolveStatus::Unbounded, Some(Certificate::DualInfeasible { ray }));
            r.iterations = it;
            return r;
        }
        last = Some((xo, zo, yo, res, pobj));
        if it == max_iter || stall >= 5 {
            break;
        }
        it += 1;

        // Residuals of the embedding.
        prob.p_mul(&x, &mut px);
        let xi: Vec<f64> = x.iter().map(|v| v / tau).collect();
        let mut rx = vec![0.0; n];
        for c in 0..n {
            rx[c] = px[c] + prob.q[c] * tau;
        }
        for i in 0..mi {
            let a = prob.row_i(i);
            for c in 0..n {
                rx[c] += a[c] * z[i];
            }
        }
        for e in 0..me {
            let a = prob.row_e(e);
            for c in 0..n {
                rx[c] += a[c] * y[e];
            }
        }
        let ri: Vec<f64> = (0..mi).map(|i| dot(prob.row_i(i), &x) + s[i] - prob.bi[i] * tau).collect();
        let re: Vec<f64> = (0..me).map(|e| dot(prob.row_e(e), &x) - prob.be[e] * tau).collect();
        let xpx = dot(&x, &px);
        let rtau = dot(&prob.q, &x) + dot(&prob.bi, &z) + dot(&prob.be, &y) + xpx / tau + kappa;

        let mu = (dot(&s, &z) + tau * kappa) / (mi as f64 + 1.0);

        let kkt = match Kkt::new(&prob, &s, &z) {
            Some(k) => k,
            None => break,
        };
        // τ column.
        let neg_q: Vec<f64> = prob.q.iter().map(|v| -v).collect();
        let (dx2, dz2, dy2) = kkt.solve(&neg_q, &prob.bi, &prob.be);
        let mut pxi = vec![0.0; n];
        prob.p_mul(&xi, &mut pxi);
        let qt: Vec<f64> = (0..n).map(|c| prob.q[c] + 2.0 * pxi[c]).collect();
        let xi_p_xi = dot(&xi, &pxi);

        let direction = |eta: f64, ds_target: &[f64], dk_target: f64| {
            let r1: Vec<f64> = rx.iter().map(|v| -eta * v).collect();
            let r2: Vec<f64> = (0..mi).map(|i| -eta * ri[i] + ds_target[i] / z[i]).collect();
            let r3: Vec<f64> = re.iter().map(|v| -eta * v).collect();
            let (dx1, dz1, dy1) = kkt.solve(&r1, &r2, &r3);
            let num = -eta * rtau + dk_target / tau - dot(&qt, &dx1) - dot(&prob.bi, &dz1) - dot(&prob.be, &dy1);
            let den = dot(&qt, &dx2) + dot(&prob.bi, &dz2) + dot(&prob.be, &dy2) - xi_p_xi - kappa / tau;
            let dtau = if den.abs() > 0.0 { num / den } else { 0.0 };
            let dx: Vec<f64> = (0..n).map(|c| dx1[c] + dtau * dx2[c]).collect();
            let dz: Vec<f64> = (0..mi).map(|i| dz1[i] + dtau * dz2[i]).collect();
            let dy: Vec<f64> = (0..me).map(|e| dy1[e] + dtau * dy2[e]).collect();
            let ds: Vec<f64> = (0..mi).map(|i| (-ds_target[i] - s[i] * dz[i]) / z[i]).collect();
            let dkappa = (-dk_target - kappa * dtau) / tau;
            (dx, dz, dy, ds, dtau, dkappa)
        };
        let step_len = |dz: &[f64], ds: &[f64], dtau: f64, dkappa: f64| {
            let mut a = max_step(&s, ds).min(max_step(&z, dz));
            if dtau < 0.0 {
                a = a.min(-tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-kappa / dkappa);
            }
            a
        };

        // Predictor.
        let sz: Vec<f64> = (0..mi).map(|i| s[i] * z[i]).collect();
        let (_, dza, _, dsa, dta, dka) = direction(1.0, &sz, tau * kappa);
        let alpha_aff = step_len(&dza, &dsa, dta, dka).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // Corrector.
        let ds_t: Vec<f64> = (0..mi).map(|i| sz[i] + dsa[i] * dza[i] - sigma * mu).collect();
        let dk_t = tau * kappa + dta * dka - sigma * mu;
        let (dx, dz, dy, ds, dtau, dkappa) = direction(1.0 - sigma, &ds_t, dk_t);
        let alpha = (0.99 * step_len(&dz, &ds, dtau, dkappa)).min(1.0);
        if !alpha.is_finite() || alpha < 1e-10 {
            stall += 1;
            continue;
        }
        stall = 0;
        for c in 0..n {
            x[c] += alpha * dx[c];
        }
        for i in 0..mi {
            s[i] += alpha * ds[i];
            z[i] += alpha * dz[i];
        }
        for e in 0..me {
            y[e] += alpha * dy[e];
        }
        tau += alpha * dtau;
        kappa += alpha * dkappa;

        // Keep the embedding scaled; the homogeneous system is invariant under
        // a common positive rescaling of (x, s, z, y, τ, κ).
        let scale = tau.max(kappa);
        if !(1e-8..=1e8).contains(&scale) {
            let inv = 1.0 / scale;
            x.iter_mut().for_each(|v| *v *= inv);
            s.iter_mut().for_each(|v| *v *= inv);
            z.iter_mut().for_each(|v| *v *= inv);
            y.iter_mut().for_each(|v| *v *= inv);
            tau *= inv;
            kappa *= inv;
        }
    }

    let (xo, zo, yo, res, pobj) = last.unwrap_or_else(|| {
        let (xo, zo, yo) = unscale(&x, &z, &y, tau);
        let (res, pobj) = kkt_residuals(p, q, g_mat, g, f_mat, f, &xo, &zo, &yo);
        (xo, zo, yo, res, pobj)
    });
    SolveResult {
        status: SolveStatus::IterationLimit,
        x: xo,
        z_ineq: zo,
        y_eq: yo,
        objective: pobj,
        residuals: res,
        iterations: it,
        certificate: None,
    }
}

fn trivial(
    n: usize,
    mi: usize,
    me: usize,
    status: SolveStatus,
    certificate: Option<Certificate>,
) -> SolveResult {
    let objective = match status {
        SolveStatus::Infeasible => f64::INFINITY,
        SolveStatus::Unbounded => f64::NEG_INFINITY,
        _ => f64::NAN,
    };
    SolveResult {
        status,
        x: DVector::zeros(n),
        z_ineq: DVector::zeros(mi),
        y_eq: DVector::zeros(me),
        objective,
        residuals: Residuals::default(),
        iterations: 0,
        certificate,
    }
}

#[allow(clippy::too_many_arguments)]
fn primal_infeasibility(
    prob: &Problem,
    z: &[f64],
    y: &[f64],
    tol: f64,
    map_i: &[usize],
    scale_i: &[f64],
    map_e: &[usize],
    scale_e: &[f64],
    mi_all: usize,
    me_all: usize,
    g_mat: &DMatrix<f64>,
    g: &DVector<f64>,
    f_mat: &DMatrix<f64>,
    f: &DVector<f64>,
) -> Option<Certificate> {
    let bz = dot(&prob.bi, z) + dot(&prob.be, y);
    if !(bz < 0.0) {
        return None;
    }
    let mut yi = DVector::zeros(mi_all);
    for (k, &r) in map_i.iter().enumerate() {
        yi[r] = z[k] / scale_i[k] / (-bz);
    }
    let mut ye = DVector::zeros(me_all);
    for (k, &r) in map_e.iter().enumerate() {
        ye[r] = y[k] / scale_e[k] / (-bz);
    }
    let at = g_mat.transpose() * &yi + f_mat.transpose() * &ye;
    let val = g.dot(&yi) + f.dot(&ye);
    if at.amax() <= tol && val < -tol {
        Some(Certificate::PrimalInfeasible { y_ineq: yi, y_eq: ye })
    } else {
        None
    }
}

fn dual_infeasibility(
    prob: &Problem,
    x: &[f64],
    tol: f64,
    p: &DMatrix<f64>,
    g_mat: &DMatrix<f64>,
    f_mat: &DMatrix<f64>,
) -> Option<DVector<f64>> {
    let qx = dot(&prob.q, x);
    if !(qx < 0.0) {
        return None;
    }
    let ray = DVector::from_iterator(prob.n, x.iter().map(|v| v / (-qx)));
    let pr = p * &ray;
    let gr = g_mat * &ray;
    let fr = f_mat * &ray;
    let gviol = gr.iter().fold(0.0f64, |m, v| m.max(*v));
    if pr.amax() <= tol && gviol <= tol && fr.amax() <= tol {
        Some(ray)
    } else {
        None
    }
}
