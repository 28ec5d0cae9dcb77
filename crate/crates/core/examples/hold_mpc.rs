//! Robust M-step hold MPC on a disturbed double integrator, simulated in
//! closed loop with random disturbances.

use msh::mpc::{simulate, MpcProblem, MpcSetup, MpcWeights, ScheduleSampler};
use msh::polytope::{BoxSet, Polytope};
use msh::sets::{max_control_invariant, DisturbanceSchedule, HoldConfig, LtiSystem};
use nalgebra::{DMatrix, DVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ts = 0.1;
    let m = 2;
    let sys = LtiSystem::new(
        DMatrix::from_row_slice(2, 2, &[1.0, ts, 0.0, 1.0]),
        DMatrix::from_column_slice(2, 1, &[0.5 * ts * ts, ts]),
        DMatrix::from_column_slice(2, 1, &[0.0, ts]),
        ts,
    )?;
    let x = Polytope::from_box(&[-5.0, -2.0], &[5.0, 2.0])?;
    let u = Polytope::from_box(&[-1.0], &[1.0])?;
    let schedule = DisturbanceSchedule::uniform(BoxSet::interval(-0.2, 0.2)?, m)?;
    let terminal = max_control_invariant(&sys, &x, &u, &schedule, m, 200)?;
    let setup = MpcSetup {
        system: sys,
        hold: HoldConfig::new(m, 10)?,
        state_set: x,
        input_set: u,
        schedule: schedule.clone(),
        weights: MpcWeights::diagonal(&[1.0, 0.1], &[0.1], &[1.0, 0.1]),
        reach_target: terminal,
        sequence_bound: None,
    };
    let prob = MpcProblem::new(setup)?;
    let x0 = DVector::from_vec(vec![4.0, -1.0]);
    let mut w = ScheduleSampler::new(schedule, 7);
    let trace = simulate(&prob, &x0, &mut w, 100, None)?;
    for t in (0..=trace.steps()).step_by(20) {
        let s = &trace.states[t];
        println!("t = {t:3}  position {:+.4}  velocity {:+.4}", s[0], s[1]);
    }
    println!("violations: {}, halted: {:?}", trace.violations(), trace.halted);
    Ok(())
}
