mod common;

use msh::cruise::{self, CruiseController, CruiseParams};
use msh::mpc::{
    check_switch, simulate, MpcProblem, MpcSetup, MpcStatus, MpcWeights, ScheduleSampler, SwitchDecision,
    SwitchRequest, ZeroDisturbance,
};
use msh::polytope::{BoxSet, Polytope};
use msh::sets::{max_control_invariant, DisturbanceSchedule, HoldConfig, LtiSystem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn double_integrator() -> LtiSystem {
    LtiSystem::new(
        DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
        DMatrix::from_column_slice(2, 1, &[0.5, 1.0]),
        DMatrix::identity(2, 2),
        1.0,
    )
    .unwrap()
}

fn boxp(lo: &[f64], hi: &[f64]) -> Polytope {
    Polytope::from_box(lo, hi).unwrap()
}

#[test]
fn condensed_qp_matches_hand_derivation() {
    // x⁺ = [[1,1],[0,1]] x + [0.5, 1]ᵀ u, M = 1, N = 2, no disturbance.
    let setup = MpcSetup {
        system: double_integrator(),
        hold: HoldConfig::new(1, 2).unwrap(),
        state_set: boxp(&[-10.0, -3.0], &[10.0, 3.0]),
        input_set: boxp(&[-1.0], &[1.0]),
        schedule: DisturbanceSchedule::zero(2, 1).unwrap(),
        weights: MpcWeights::diagonal(&[2.0, 1.0], &[0.5], &[3.0, 4.0]),
        reach_target: boxp(&[-5.0, -2.0], &[5.0, 2.0]),
        sequence_bound: None,
    };
    let prob = MpcProblem::new(setup).unwrap();
    let x0 = DVector::from_vec(vec![1.0, -0.5]);
    let asm = prob.assemble_qp(&x0, &prob.default_target()).unwrap();
    // B = (0.5, 1), AB = (1.5, 1):
    //   BᵀQB = 1.5, (AB)ᵀP(AB) = 10.75, BᵀPB = 4.75, (AB)ᵀPB = 6.25, R = 0.5.
    let hand_h = DMatrix::from_row_slice(2, 2, &[25.5, 12.5, 12.5, 10.5]);
    // Ax0 = (0.5, −0.5), A²x0 = (0, −0.5).
    let hand_q = DVector::from_vec(vec![-4.0, -4.0]);
    assert!((&asm.qp.hessian - &hand_h).amax() < 1e-12, "{}", asm.qp.hessian);
    assert!((&asm.qp.cost - &hand_q).amax() < 1e-12, "{}", asm.qp.cost);
    assert!((asm.constant - 4.0).abs() < 1e-12);

    // Feasible inputs: x̄₁ = (0.5 + 0.5u₀, −0.5 + u₀) in the target, |u₀|, |u₁| ≤ 1.
    let hand = Polytope::from_rows(
        2,
        &[
            (vec![0.5, 0.0], 4.5),
            (vec![-0.5, 0.0], 5.5),
            (vec![1.0, 0.0], 2.5),
            (vec![-1.0, 0.0], 1.5),
            (vec![1.0, 0.0], 1.0),
            (vec![-1.0, 0.0], 1.0),
            (vec![0.0, 1.0], 1.0),
            (vec![0.0, -1.0], 1.0),
        ],
    )
    .unwrap();
    let got = Polytope::new(asm.qp.a_ineq.clone(), asm.qp.b_ineq.clone()).unwrap();
    assert!(got.set_equal(&hand, 1e-12).unwrap());

    // The unconstrained minimiser −H⁻¹q is feasible here, so it is the optimum.
    let z = -hand_h.clone().lu().solve(&hand_q).unwrap();
    let sol = prob.solve(&x0).unwrap();
    assert_eq!(sol.status, MpcStatus::Feasible);
    assert_eq!(sol.inputs.len(), 2);
    assert!((sol.inputs[0][0] - z[0]).abs() < 1e-8 && (sol.inputs[1][0] - z[1]).abs() < 1e-8);
    let cost = 0.5 * z.dot(&(&hand_h * &z)) + hand_q.dot(&z) + 4.0;
    assert!((sol.objective - cost).abs() < 1e-8);
    // Nominal states follow the model.
    let x1 = prob.system().a() * &x0 + prob.system().b() * &sol.inputs[0];
    assert!((&sol.nominal[1] - x1).amax() < 1e-12);
}

#[test]
fn one_step_horizon_is_nominal_mpc() {
    // x⁺ = x + u, X = [−10, 10], target [−2, 3], |u| ≤ 1: feasible iff x₀ ∈ [−3, 4].
    let sys = LtiSystem::new(DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 1.0), 1.0).unwrap();
    let prob = MpcProblem::new(MpcSetup {
        system: sys,
        hold: HoldConfig::new(1, 1).unwrap(),
        state_set: boxp(&[-10.0], &[10.0]),
        input_set: boxp(&[-1.0], &[1.0]),
        schedule: DisturbanceSchedule::zero(1, 1).unwrap(),
        weights: MpcWeights::diagonal(&[1.0], &[1.0], &[1.0]),
        reach_target: boxp(&[-2.0], &[3.0]),
        sequence_bound: None,
    })
    .unwrap();
    for i in 0..=140 {
        let x = -7.0 + 0.1 * i as f64;
        let want = (-3.0 - 1e-9..=4.0 + 1e-9).contains(&x);
        if (x + 3.0).abs() < 1e-6 || (x - 4.0).abs() < 1e-6 {
            continue;
        }
        let sol = prob.solve(&DVector::from_element(1, x)).unwrap();
        assert_eq!(sol.is_feasible(), want, "x0 = {x}");
        if want {
            let next = x + sol.inputs[0][0];
            assert!((-2.0 - 1e-9..=3.0 + 1e-9).contains(&next));
        }
    }
}

fn cruise_problem(p: &CruiseParams, m: usize) -> MpcProblem {
    MpcProblem::new(MpcSetup {
        system: cruise::build_system(p).unwrap(),
        hold: HoldConfig::new(m, p.horizon).unwrap(),
        state_set: cruise::state_constraints(p),
        input_set: cruise::input_constraints(p),
        schedule: cruise::mpc_schedule(p, m).unwrap(),
        weights: MpcWeights::diagonal(&p.q_diag, &[p.r], &p.p_diag()),
        reach_target: cruise::state_constraints(p),
        sequence_bound: None,
    })
    .unwrap()
}

#[test]
fn cruise_decision_dimension_is_holds_times_inputs() {
    let p = CruiseParams::default();
    for (m, dim) in [(1, 10), (5, 2), (10, 1)] {
        let prob = cruise_problem(&p, m);
        let asm = prob.assemble_qp(&DVector::from_column_slice(&p.x0), &prob.default_target()).unwrap();
        assert_eq!(asm.qp.hessian.ncols(), dim, "M = {m}");
    }
}

#[test]
fn cruise_initial_state_with_slice_target() {
    let p = CruiseParams::default();
    let fams = common::families(&[10]);
    let ctrl = CruiseController::new(&p, fams[&10].clone()).unwrap();
    let x0 = DVector::from_column_slice(&p.x0);
    let sol = ctrl.problem.solve_with(&x0, &ctrl.target(&x0).unwrap()).unwrap();
    assert_eq!(sol.status, MpcStatus::Feasible);
    assert_eq!(sol.inputs.len(), 1);
    assert!(sol.inputs[0][0].abs() <= p.u_max + 1e-9);
    let far = DVector::from_vec(vec![1e6, 30.0, 25.0]);
    assert_eq!(ctrl.problem.solve_with(&far, &ctrl.target(&far).unwrap()).unwrap().status, MpcStatus::Infeasible);
}

/// Double integrator with a small disturbance box and its hold invariant
/// set as reach target.
fn regulator(m: usize, n: usize, w: f64) -> MpcProblem {
    let sys = double_integrator();
    let x = boxp(&[-10.0, -3.0], &[10.0, 3.0]);
    let u = boxp(&[-1.0], &[1.0]);
    let sched = DisturbanceSchedule::uniform(BoxSet::new(DVector::from_element(2, -w), DVector::from_element(2, w)).unwrap(), m).unwrap();
    let c = max_control_invariant(&sys, &x, &u, &sched, m, 500).unwrap();
    assert!(!c.is_empty());
    MpcProblem::new(MpcSetup {
        system: sys,
        hold: HoldConfig::new(m, n).unwrap(),
        state_set: x,
        input_set: u,
        schedule: sched,
        weights: MpcWeights::diagonal(&[1.0, 1.0], &[1.0], &[1.0, 1.0]),
        reach_target: c,
        sequence_bound: None,
    })
    .unwrap()
}

#[test]
fn zero_length_run_keeps_only_the_initial_state() {
    let prob = regulator(2, 4, 0.02);
    let x0 = DVector::from_vec(vec![1.0, 0.0]);
    let trace = simulate(&prob, &x0, &mut ZeroDisturbance(2), 0, None).unwrap();
    assert_eq!(trace.states.len(), 1);
    assert!(trace.inputs.is_empty());
    // Header plus the initial state with blank input columns.
    let csv = trace.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], trace.csv_header());
    assert!(lines[1].starts_with("0,0,1,0,,,"), "{}", lines[1]);
}

#[test]
fn inputs_are_held_bitwise_within_each_window() {
    let m = 3;
    let prob = regulator(m, 6, 0.02);
    let x0 = DVector::from_vec(vec![4.0, -1.0]);
    let mut src = ScheduleSampler::new(prob.schedule().clone(), 5);
    let trace = simulate(&prob, &x0, &mut src, 90, None).unwrap();
    assert!(trace.halted.is_none());
    for t in 0..trace.inputs.len() {
        assert_eq!(trace.solved[t], t % m == 0);
        if t % m != 0 {
            assert_eq!(trace.inputs[t], trace.inputs[t - t % m], "t = {t}");
        }
    }
    assert_eq!(trace.violations(), 0);
}

#[test]
fn nominal_run_from_invariant_set_never_fails() {
    let prob = regulator(1, 10, 0.02);
    let x0 = DVector::from_vec(vec![-6.0, 2.0]);
    assert!(prob.feasible_region(&prob.default_target()).unwrap().contains_point(x0.as_slice(), 0.0));
    let trace = simulate(&prob, &x0, &mut ZeroDisturbance(2), 300, None).unwrap();
    assert!(trace.halted.is_none());
    assert_eq!(trace.violations(), 0);
    assert_eq!(trace.final_violation, Some(false));
    // With P = Q and no disturbance the optimal cost decreases along the run.
    let costs: Vec<f64> = trace.objectives.iter().flatten().copied().collect();
    let mut rises = 0;
    for w in costs.windows(2) {
        if w[1] > w[0] + 1e-6 * (1.0 + w[0]) {
            rises += 1;
        }
    }
    println!("cost rises along the nominal run: {rises} of {}", costs.len() - 1);
    assert_eq!(rises, 0);
}

#[test]
fn feasibility_matches_feasible_region_away_from_its_boundary() {
    let prob = regulator(2, 4, 0.05);
    let target = prob.default_target();
    let region = prob.feasible_region(&target).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let (mut inside, mut outside) = (0, 0);
    for _ in 0..400 {
        let x = DVector::from_vec(vec![rng.gen_range(-12.0..12.0), rng.gen_range(-4.0..4.0)]);
        let excess = region.max_violation(x.as_slice()).unwrap().1;
        if excess.abs() < 1e-4 {
            continue;
        }
        let sol = prob.solve_with(&x, &target).unwrap();
        assert_eq!(sol.is_feasible(), excess < 0.0, "x = {x}, excess {excess}");
        if excess < 0.0 {
            inside += 1;
        } else {
            outside += 1;
        }
    }
    assert!(inside > 50 && outside > 50, "{inside} inside, {outside} outside");
}

#[test]
fn switch_to_the_same_hold_is_safe_when_feasible() {
    let prob = regulator(2, 4, 0.05);
    let target = prob.default_target();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut checked = 0;
    for _ in 0..200 {
        let x = DVector::from_vec(vec![rng.gen_range(-10.0..10.0), rng.gen_range(-3.0..3.0)]);
        if !prob.solve_with(&x, &target).unwrap().is_feasible() {
            continue;
        }
        let req = SwitchRequest { hold: 2, target: target.clone() };
        let d = check_switch(&x, &req, &prob).unwrap();
        // Tolerate round-off at the region boundary only.
        if let SwitchDecision::Unsafe { excess, .. } = d {
            assert!(excess < 1e-8, "x = {x}: {excess}");
        }
        checked += 1;
    }
    assert!(checked > 30);
    let req = SwitchRequest { hold: 3, target: target.clone() };
    assert!(check_switch(&DVector::zeros(2), &req, &prob).is_err());
}

#[test]
fn cruise_switch_down_from_long_hold_is_safe() {
    let p = CruiseParams::default();
    let fams = common::families(&[5, 10]);
    let c5 = CruiseController::new(&p, fams[&5].clone()).unwrap();
    let v0 = 25.0;
    let slice10 = cruise::online_slice(&fams[&10], v0, &p).unwrap();
    // Every vertex of the M = 10 slice at this front speed.
    let mut n_checked = 0;
    for v in slice10.cylinder_at(cruise::V0, v0).unwrap().project(&[0, 1]).unwrap().vertices().unwrap() {
        let x = DVector::from_vec(vec![v[0], v[1], v0]);
        let req = SwitchRequest { hold: 5, target: c5.target(&x).unwrap() };
        let d = check_switch(&x, &req, &c5.problem).unwrap();
        assert!(d.is_safe(), "x = {x}: {d:?}");
        // And the candidate MPC agrees.
        assert!(c5.problem.solve_with(&x, &req.target).unwrap().is_feasible(), "x = {x}");
        n_checked += 1;
    }
    assert!(n_checked >= 3);
}

#[test]
fn cruise_switch_up_from_boundary_state_has_certificate() {
    let p = CruiseParams::default();
    let fams = common::families(&[1, 10]);
    let c10 = CruiseController::new(&p, fams[&10].clone()).unwrap();
    let v0 = 25.0;
    let slice1 = cruise::online_slice(&fams[&1], v0, &p).unwrap();
    let probe = DVector::from_vec(vec![50.0, 25.0, v0]);
    let region = c10.problem.feasible_region(&c10.target(&probe).unwrap()).unwrap();
    // The vertex of the M = 1 slice near d_min furthest outside the M = 10 region.
    let (x, excess) = slice1
        .cylinder_at(cruise::V0, v0)
        .unwrap()
        .project(&[0, 1])
        .unwrap()
        .vertices()
        .unwrap()
        .into_iter()
        .filter(|v| v[0] < p.d_min + 10.0)
        .map(|v| {
            let x = DVector::from_vec(vec![v[0], v[1], v0]);
            let e = region.max_violation(x.as_slice()).unwrap().1;
            (x, e)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert!(excess > 1e-3, "M = 1 slice lies inside the M = 10 region: {excess}");
    let req = SwitchRequest { hold: 10, target: c10.target(&x).unwrap() };
    let SwitchDecision::Unsafe { row, normal, rhs, excess: ex } = check_switch(&x, &req, &c10.problem).unwrap() else {
        panic!("switch up from {x} judged safe");
    };
    let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lhs: f64 = normal.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    assert!(((lhs - rhs) / norm - ex).abs() < 1e-9);
    assert!(ex > 0.0);
    assert_eq!(region.a().row(row).iter().copied().collect::<Vec<_>>(), normal);
    assert!(!c10.problem.solve_with(&x, &req.target).unwrap().is_feasible());
}

#[test]
fn disturbance_must_contain_origin() {
    let sys = double_integrator();
    let bad = DisturbanceSchedule::uniform(BoxSet::new(DVector::from_element(2, 0.1), DVector::from_element(2, 0.2)).unwrap(), 1).unwrap();
    let r = MpcProblem::new(MpcSetup {
        system: sys,
        hold: HoldConfig::new(1, 2).unwrap(),
        state_set: boxp(&[-10.0, -3.0], &[10.0, 3.0]),
        input_set: boxp(&[-1.0], &[1.0]),
        schedule: bad,
        weights: MpcWeights::diagonal(&[1.0, 1.0], &[1.0], &[1.0, 1.0]),
        reach_target: boxp(&[-1.0, -1.0], &[1.0, 1.0]),
        sequence_bound: None,
    });
    assert!(matches!(r, Err(msh::mpc::MpcError::DisturbanceExcludesOrigin(0))));
}
