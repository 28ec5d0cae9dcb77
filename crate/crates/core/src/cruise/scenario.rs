use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{switched_bounds, CruiseError, CruiseParams, Result, ScenarioConfig, V0};
use crate::mpc::DisturbanceSource;

/// Front velocity below this counts as stopped.
pub const STOPPED: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioKind {
    UniformRandom,
    /// Uniform random accelerations, then full braking from this time (s)
    /// until the front car stops.
    FullBrakeAfter(f64),
    ConstantVelocity,
    /// Accelerations per step, zero after the list ends.
    Scripted(Vec<f64>),
}

/// Front-car acceleration generator. Every emitted value lies in the
/// switched bounds and keeps `v0` inside `[v_min, v_max]`.
#[derive(Debug, Clone)]
pub struct FrontCarScenario {
    pub kind: ScenarioKind,
    pub seed: u64,
    params: CruiseParams,
    rng: ChaCha8Rng,
}

impl FrontCarScenario {
    pub fn new(kind: ScenarioKind, seed: u64, params: &CruiseParams) -> FrontCarScenario {
        FrontCarScenario { kind, seed, params: params.clone(), rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn uniform(&mut self) -> f64 {
        self.rng.gen_range(self.params.w_min..=self.params.w_max)
    }

    /// Acceleration at step `t` for front velocity `v0`.
    pub fn accel(&mut self, t: usize, v0: f64) -> f64 {
        let time = t as f64 * self.params.ts;
        let (v_min, w_min) = (self.params.v_min, self.params.w_min);
        let raw = match &self.kind {
            ScenarioKind::UniformRandom => self.uniform(),
            &ScenarioKind::FullBrakeAfter(after) => {
                // Draw regardless so the random phase does not depend on the brake time.
                let r = self.uniform();
                if time + 1e-9 < after {
                    r
                } else if v0 < v_min + STOPPED {
                    0.0
                } else {
                    w_min
                }
            }
            ScenarioKind::ConstantVelocity => 0.0,
            ScenarioKind::Scripted(s) => s.get(t).copied().unwrap_or(0.0),
        };
        let p = &self.params;
        let b = switched_bounds(v0, p);
        let mut w = raw.clamp(b.lower[0], b.upper[0]);
        if p.ts > 0.0 {
            w = w.clamp(((p.v_min - v0) / p.ts).min(0.0), ((p.v_max - v0) / p.ts).max(0.0));
        }
        w
    }
}

impl DisturbanceSource for FrontCarScenario {
    fn sample(&mut self, t: usize, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, self.accel(t, x[V0]))
    }
}

pub fn make_scenario(cfg: &ScenarioConfig, p: &CruiseParams) -> Result<FrontCarScenario> {
    let kind = match cfg.kind.as_str() {
        "uniform_random" => ScenarioKind::UniformRandom,
        "full_brake_after" => ScenarioKind::FullBrakeAfter(cfg.brake_after_s),
        "constant_velocity" => ScenarioKind::ConstantVelocity,
        "scripted" => ScenarioKind::Scripted(cfg.script.clone()),
        other => return Err(CruiseError::InvalidParams(format!("scenario.kind: unknown {other:?}"))),
    };
    Ok(FrontCarScenario::new(kind, cfg.seed, p))
}
