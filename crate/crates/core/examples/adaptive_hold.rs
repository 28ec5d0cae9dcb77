//! Hold length adapted online: once the gap settles the supervisor moves to
//! shorter holds, each switch checked for safety first.

use msh::cruise::{adaptive_study, families_for, CruiseParams, SupervisorConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = CruiseParams::default();
    let sup = SupervisorConfig::default();
    let fams = families_for(&p, &sup.ladder)?;
    let (run, supervisor) = adaptive_study(&p, &fams, &sup, 60.0)?;
    for e in &supervisor.events {
        println!("{e}");
    }
    let tr = &run.trace;
    for t in (0..=tr.steps()).step_by(60) {
        let hold = tr.holds.get(t).or(tr.holds.last()).copied().unwrap_or(0);
        println!("t = {:4.1} s  M = {hold:2}  gap {:.3} m", t as f64 * p.ts, tr.states[t][0]);
    }
    Ok(())
}
