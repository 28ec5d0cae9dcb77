//! Front car drives randomly for 15 s and then brakes to a stop; the ego
//! car stops behind it for every hold length.

use msh::cruise::{brake_study, families_for, CruiseParams, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = CruiseParams::default();
    let holds = [1, 5, 10];
    let fams = families_for(&p, &holds)?;
    let runs = brake_study(&p, &fams, &holds, &ScenarioConfig { seed: 3, ..Default::default() })?;
    for r in &runs {
        println!(
            "{:9} min distance {:.6} m, final ego speed {:.2e} m/s, mean distance while random {:.2} m, violations {}",
            r.name,
            r.min_distance(),
            r.final_ego_velocity(),
            r.mean_distance(0..150),
            r.trace.violations()
        );
    }
    Ok(())
}
