use msh::optim::{
    kkt_residuals, solve_lp, solve_qp, Certificate, LinearProgram, QuadraticProgram, SolveStatus,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-8;

/// Every d-subset of `rows`, in lexicographic order.
fn subsets(rows: usize, d: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, rows: usize, d: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for i in start..rows {
            cur.push(i);
            rec(i + 1, rows, d, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, rows, d, &mut Vec::new(), &mut out);
    out
}

/// Minimum of `c·x` over the vertices of `{Gx ≤ g}`, or `None` when no vertex exists.
fn vertex_oracle(c: &DVector<f64>, g_mat: &DMatrix<f64>, g: &DVector<f64>) -> Option<f64> {
    let d = c.len();
    let mut best: Option<f64> = None;
    for idx in subsets(g.len(), d) {
        let a = DMatrix::from_fn(d, d, |r, k| g_mat[(idx[r], k)]);
        let b = DVector::from_fn(d, |r, _| g[idx[r]]);
        let Some(x) = a.clone().lu().solve(&b) else { continue };
        if (&a * &x - &b).amax() > 1e-9 * (1.0 + b.amax()) {
            continue;
        }
        let viol = (g_mat * &x - g).max();
        if viol <= 1e-9 * (1.0 + g.amax()) {
            let v = c.dot(&x);
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    best
}

/// Random bounded LP: a box `[-5, 5]^d` plus random cuts through a ball around a
/// random centre. Some instances are infeasible on purpose.
fn random_lp(rng: &mut ChaCha8Rng, feasible: bool) -> (DVector<f64>, DMatrix<f64>, DVector<f64>) {
    let d = rng.gen_range(1..=6usize);
    let extra = rng.gen_range(1..=(20 - 2 * d).max(1));
    let rows = 2 * d + extra;
    let mut g_mat = DMatrix::zeros(rows, d);
    let mut g = DVector::zeros(rows);
    for i in 0..d {
        g_mat[(2 * i, i)] = 1.0;
        g_mat[(2 * i + 1, i)] = -1.0;
        g[2 * i] = 5.0;
        g[2 * i + 1] = 5.0;
    }
    let centre = DVector::from_fn(d, |_, _| rng.gen_range(-2.0..2.0));
    for r in 2 * d..rows {
        let a = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
        let off = if feasible { rng.gen_range(0.05..2.0) } else { rng.gen_range(-2.0..2.0) };
        for k in 0..d {
            g_mat[(r, k)] = a[k];
        }
        g[r] = a.dot(&centre) + off;
    }
    let c = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
    (c, g_mat, g)
}

#[test]
fn lp_matches_vertex_enumeration_on_200_feasible_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..200 {
        let (c, g_mat, g) = random_lp(&mut rng, true);
        let want = vertex_oracle(&c, &g_mat, &g).expect("feasible by construction");
        let res = solve_lp(&LinearProgram::new(c.clone(), g_mat.clone(), g.clone()), TOL).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal, "case {case}");
        assert!((res.objective - want).abs() <= 1e-6 * (1.0 + want.abs()), "case {case}: {} vs {want}", res.objective);
        let viol = (&g_mat * &res.x - &g).max();
        assert!(viol <= TOL * (1.0 + g.amax()), "case {case}: violation {viol}");
        // Duality gap from the returned multipliers.
        let dual = -g.dot(&res.z_ineq);
        assert!((res.objective - dual).abs() <= TOL * (1.0 + res.objective.abs()), "case {case}");
    }
}

#[test]
fn lp_status_agrees_with_oracle_on_mixed_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut infeasible = 0;
    for case in 0..200 {
        let (c, g_mat, g) = random_lp(&mut rng, false);
        let want = vertex_oracle(&c, &g_mat, &g);
        let res = solve_lp(&LinearProgram::new(c, g_mat.clone(), g.clone()), TOL).unwrap();
        match want {
            Some(v) => {
                // Oracle feasibility uses a 1e-9 slack; skip near-degenerate empties.
                if res.status == SolveStatus::Infeasible {
                    continue;
                }
                assert_eq!(res.status, SolveStatus::Optimal, "case {case}");
                assert!((res.objective - v).abs() <= 1e-6 * (1.0 + v.abs()), "case {case}");
            }
            None => {
                infeasible += 1;
                assert_eq!(res.status, SolveStatus::Infeasible, "case {case}");
                let Some(Certificate::PrimalInfeasible { y_ineq, .. }) = res.certificate else {
                    panic!("case {case}: missing certificate");
                };
                check_farkas(&g_mat, &g, &y_ineq);
            }
        }
    }
    assert!(infeasible > 10, "too few infeasible draws: {infeasible}");
}

fn check_farkas(g_mat: &DMatrix<f64>, g: &DVector<f64>, y: &DVector<f64>) {
    assert!(y.iter().all(|&v| v >= -TOL), "negative multiplier");
    let scale = y.amax().max(1e-300);
    let gy = g_mat.transpose() * y;
    assert!(gy.amax() / scale <= 1e-6, "Gᵀy = {}", gy.amax());
    assert!(g.dot(y) < -TOL, "gᵀy = {}", g.dot(y));
}

#[test]
fn lp_detects_unbounded_direction() {
    // min −x − y over the positive quadrant cut by x − y ≤ 1.
    let g_mat = DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, -1.0]);
    let lp = LinearProgram::new(DVector::from_vec(vec![-1.0, -1.0]), g_mat.clone(), DVector::from_vec(vec![0.0, 0.0, 1.0]));
    let res = solve_lp(&lp, TOL).unwrap();
    assert_eq!(res.status, SolveStatus::Unbounded);
    if let Some(Certificate::DualInfeasible { ray }) = res.certificate {
        assert!((g_mat * &ray).max() <= 1e-6 * ray.amax());
        assert!(-ray[0] - ray[1] < 0.0);
    }
}

/// Brute-force QP oracle: the unique active set whose KKT point is primal and
/// dual feasible. Hessian must be positive definite.
fn qp_oracle(p: &DMatrix<f64>, q: &DVector<f64>, g_mat: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let d = q.len();
    let rows = g.len();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for k in 0..=d.min(rows) {
        for idx in subsets(rows, k) {
            let size = d + k;
            let mut kkt = DMatrix::zeros(size, size);
            let mut rhs = DVector::zeros(size);
            kkt.view_mut((0, 0), (d, d)).copy_from(p);
            for i in 0..d {
                rhs[i] = -q[i];
            }
            for (j, &r) in idx.iter().enumerate() {
                for c in 0..d {
                    kkt[(c, d + j)] = g_mat[(r, c)];
                    kkt[(d + j, c)] = g_mat[(r, c)];
                }
                rhs[d + j] = g[r];
            }
            let Some(sol) = kkt.lu().solve(&rhs) else { continue };
            let x = sol.rows(0, d).into_owned();
            if (0..k).any(|j| sol[d + j] < -1e-9) {
                continue;
            }
            if (g_mat * &x - g).max() > 1e-9 * (1.0 + g.amax()) {
                continue;
            }
            let obj = 0.5 * x.dot(&(p * &x)) + q.dot(&x);
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, x));
            }
        }
    }
    best.map(|(_, x)| x)
}

#[test]
fn qp_matches_active_set_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..100 {
        let d = rng.gen_range(1..=4usize);
        let l = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
        let p = &l * l.transpose() + DMatrix::identity(d, d) * 0.1;
        let q = DVector::from_fn(d, |_, _| rng.gen_range(-3.0..3.0));
        let rows = rng.gen_range(1..=8usize);
        let g_mat = DMatrix::from_fn(rows, d, |_, _| rng.gen_range(-1.0..1.0));
        let g = DVector::from_fn(rows, |_, _| rng.gen_range(0.1..1.5));
        let want = qp_oracle(&p, &q, &g_mat, &g).expect("origin is strictly feasible");
        let res = solve_qp(&QuadraticProgram::new(p.clone(), q.clone(), g_mat.clone(), g.clone()), TOL).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal, "case {case}");
        assert!((&res.x - &want).amax() <= 1e-6 * (1.0 + want.amax()), "case {case}: {} vs {}", res.x, want);
    }
}

#[test]
fn qp_projection_onto_interval_closed_form() {
    // min (x − 3)² on [0, 1]: ½·2x² − 6x + 9, so the constant 9 is added back.
    let qp = QuadraticProgram::new(
        DMatrix::from_element(1, 1, 2.0),
        DVector::from_element(1, -6.0),
        DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
        DVector::from_vec(vec![1.0, 0.0]),
    );
    let res = solve_qp(&qp, TOL).unwrap();
    let want_x = 3.0f64.clamp(0.0, 1.0);
    assert!((res.x[0] - want_x).abs() < 1e-8);
    assert!((res.objective + 9.0 - (want_x - 3.0).powi(2)).abs() < 1e-8);
}

#[test]
fn qp_single_point_feasible_set() {
    // Two opposite rows pin x to one value; interior-point methods stall here.
    let a = 0.7312;
    let qp = QuadraticProgram::new(
        DMatrix::identity(2, 2),
        DVector::from_vec(vec![1.0, -2.0]),
        DMatrix::from_row_slice(3, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0]),
        DVector::from_vec(vec![a, -a, 1.0]),
    );
    let res = solve_qp(&qp, TOL).unwrap();
    assert_eq!(res.status, SolveStatus::Optimal);
    assert!((res.x[0] - a).abs() < 1e-9 && (res.x[1] - 1.0).abs() < 1e-9, "{}", res.x);
}

#[test]
fn qp_infeasible_certificate_validates() {
    let g_mat = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
    let g = DVector::from_vec(vec![1.0, -1.0, -1.0]);
    let qp = QuadraticProgram::new(DMatrix::identity(2, 2), DVector::zeros(2), g_mat.clone(), g.clone());
    let res = solve_qp(&qp, TOL).unwrap();
    assert_eq!(res.status, SolveStatus::Infeasible);
    if let Some(Certificate::PrimalInfeasible { y_ineq, .. }) = res.certificate {
        check_farkas(&g_mat, &g, &y_ineq);
    }
}

fn qp_strategy() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, bool)> {
    (1usize..=4).prop_flat_map(|d| {
        (1usize..=8).prop_flat_map(move |rows| {
            (
                Just(d),
                prop::collection::vec(-1.0f64..1.0, d * d),
                prop::collection::vec(-3.0f64..3.0, d),
                prop::collection::vec(-1.0f64..1.0, rows * d),
                prop::collection::vec(0.05f64..2.0, rows),
                any::<bool>(),
            )
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Independent recomputation of the KKT residuals agrees with the solver.
    #[test]
    fn qp_residuals_recompute((d, l, q, a, b, singular) in qp_strategy()) {
        let l = DMatrix::from_row_slice(d, d, &l);
        let mut p = &l * l.transpose();
        if !singular {
            p += DMatrix::identity(d, d) * 0.05;
        }
        let rows = b.len();
        let g_mat = DMatrix::from_row_slice(rows, d, &a);
        let g = DVector::from_vec(b);
        let q = DVector::from_vec(q);
        // A box keeps the singular case bounded.
        let mut gb = DMatrix::zeros(rows + 2 * d, d);
        let mut hb = DVector::zeros(rows + 2 * d);
        gb.view_mut((0, 0), (rows, d)).copy_from(&g_mat);
        hb.rows_mut(0, rows).copy_from(&g);
        for i in 0..d {
            gb[(rows + 2 * i, i)] = 1.0;
            gb[(rows + 2 * i + 1, i)] = -1.0;
            hb[rows + 2 * i] = 10.0;
            hb[rows + 2 * i + 1] = 10.0;
        }
        let qp = QuadraticProgram::new(p.clone(), q.clone(), gb.clone(), hb.clone());
        let res = solve_qp(&qp, TOL).unwrap();
        prop_assert_eq!(res.status, SolveStatus::Optimal);
        let (check, obj) = kkt_residuals(&p, &q, &gb, &hb, &DMatrix::zeros(0, d), &DVector::zeros(0), &res.x, &res.z_ineq, &res.y_eq);
        prop_assert!(check.max() <= TOL, "{:?}", check);
        prop_assert!((check.primal - res.residuals.primal).abs() <= 10.0 * TOL);
        prop_assert!((check.dual - res.residuals.dual).abs() <= 10.0 * TOL);
        prop_assert!((check.gap - res.residuals.gap).abs() <= 10.0 * TOL);
        prop_assert!((obj - res.objective).abs() <= 10.0 * TOL * (1.0 + obj.abs()));
        // Complementarity and sign of the multipliers.
        let slack = &hb - &gb * &res.x;
        for i in 0..hb.len() {
            prop_assert!(res.z_ineq[i] >= -TOL);
            prop_assert!((res.z_ineq[i] * slack[i]).abs() <= 1e-6 * (1.0 + res.z_ineq.amax()));
        }
    }

    /// Adding a redundant row never changes an LP optimum.
    #[test]
    fn lp_redundant_row_is_harmless(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, g_mat, g) = random_lp(&mut rng, true);
        let base = solve_lp(&LinearProgram::new(c.clone(), g_mat.clone(), g.clone()), TOL).unwrap();
        let mut g2 = g_mat.clone().insert_row(g_mat.nrows(), 0.0);
        let mut h2 = g.clone().insert_row(g.len(), 0.0);
        g2[(g_mat.nrows(), 0)] = 1.0;
        h2[g.len()] = 100.0;
        let res = solve_lp(&LinearProgram::new(c, g2, h2), TOL).unwrap();
        prop_assert_eq!(res.status, SolveStatus::Optimal);
        prop_assert!((res.objective - base.objective).abs() <= 1e-7 * (1.0 + base.objective.abs()));
    }
}
