//! Hold-invariant sets of a disturbed double integrator for several hold
//! lengths: longer holds give smaller sets.

use msh::polytope::Polytope;
use msh::sets::{max_control_invariant, DisturbanceSchedule, LtiSystem};
use msh::polytope::BoxSet;
use nalgebra::DMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ts = 0.1;
    let sys = LtiSystem::new(
        DMatrix::from_row_slice(2, 2, &[1.0, ts, 0.0, 1.0]),
        DMatrix::from_column_slice(2, 1, &[0.5 * ts * ts, ts]),
        DMatrix::from_column_slice(2, 1, &[0.0, ts]),
        ts,
    )?;
    let x = Polytope::from_box(&[-5.0, -2.0], &[5.0, 2.0])?;
    let u = Polytope::from_box(&[-1.0], &[1.0])?;
    let mut previous: Option<Polytope> = None;
    for m in [1, 2, 4] {
        let sched = DisturbanceSchedule::uniform(BoxSet::interval(-0.2, 0.2)?, m)?;
        let c = max_control_invariant(&sys, &x, &u, &sched, m, 200)?;
        let (lo, hi) = c.bounding_box()?.expect("nonempty");
        print!("M = {m}: {} rows, velocity range [{:.3}, {:.3}]", c.nrows(), lo[1], hi[1]);
        if let Some(prev) = &previous {
            print!(", inside the M/2 set: {}", prev.contains(&c, 1e-6)?);
        }
        println!();
        previous = Some(c);
    }
    Ok(())
}
