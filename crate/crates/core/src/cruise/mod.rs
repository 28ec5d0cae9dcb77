//! Adaptive cruise control: front car (0) and ego car (1) with state
//! `[d, v1, v0]`, the ego acceleration as input and the front acceleration
//! as a switched disturbance.

mod params;
mod scenario;
mod study;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::mpc::MpcError;
use crate::polytope::{BoxSet, Polytope, PolytopeError};
use crate::sets::{self, DisturbanceSchedule, FixedPointOptions, LtiSystem, SetsError};

pub use params::{CruiseParams, ScenarioConfig, StudyConfig, SupervisorConfig};
pub use scenario::{make_scenario, FrontCarScenario, ScenarioKind, STOPPED};
pub use study::{
    adaptive_study, brake_study, families_for, families_for_with, family_dirs, labels, read_family, run_study, write_family,
    CruiseController, FrontCarBound, StudyOutput, StudyRun,
};

/// State layout: following distance, ego velocity, front-car velocity.
pub const D: usize = 0;
pub const V1: usize = 1;
pub const V0: usize = 2;
/// Half-width of the `v0 = v` slab used for fixed-velocity slices.
pub const SLAB_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CruiseError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Sets(#[from] SetsError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error("slice {index} of the {family} family is empty")]
    EmptySlice { family: &'static str, index: usize },
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, CruiseError>;

/// Double-integrator platoon model.
pub fn build_system(p: &CruiseParams) -> Result<LtiSystem> {
    let ts = p.ts;
    if ts == 0.0 {
        log::warn!("sampling time is zero: the model is static");
    }
    let a = DMatrix::from_row_slice(3, 3, &[1.0, -ts, ts, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let b = DMatrix::from_column_slice(3, 1, &[-0.5 * ts * ts, ts, 0.0]);
    let e = DMatrix::from_column_slice(3, 1, &[0.5 * ts * ts, 0.0, ts]);
    Ok(LtiSystem::new(a, b, e, ts)?)
}

/// Front-car acceleration bounds at front velocity `v0`: no further braking
/// at `v_min`, no further acceleration at `v_max`.
pub fn switched_bounds(v0: f64, p: &CruiseParams) -> BoxSet {
    let lo = if v0 <= p.v_min { 0.0 } else { p.w_min };
    let hi = if v0 >= p.v_max { 0.0 } else { p.w_max };
    BoxSet::interval(lo, hi).expect("bounds are ordered")
}

/// `{d_min ≤ d ≤ d_max, v_min ≤ v1 ≤ v_max}`; `v0` is free.
pub fn state_constraints(p: &CruiseParams) -> Polytope {
    Polytope::from_rows(
        3,
        &[
            (vec![1.0, 0.0, 0.0], p.d_max),
            (vec![-1.0, 0.0, 0.0], -p.d_min),
            (vec![0.0, 1.0, 0.0], p.v_max),
            (vec![0.0, -1.0, 0.0], -p.v_min),
        ],
    )
    .expect("finite bounds")
}

pub fn input_constraints(p: &CruiseParams) -> Polytope {
    Polytope::from_box(&[p.u_min], &[p.u_max]).expect("u_min < u_max")
}

/// `X ∩ {|v0 − v| ≤ SLAB_EPS}`.
pub fn velocity_slab(p: &CruiseParams, v: f64) -> Polytope {
    let slab = Polytope::from_rows(
        3,
        &[(vec![0.0, 0.0, 1.0], v + SLAB_EPS), (vec![0.0, 0.0, -1.0], -v + SLAB_EPS)],
    )
    .expect("finite");
    state_constraints(p).stack(&slab).expect("same dimension")
}

/// Disturbance box used for MPC tightening: the interior case of the switch.
pub fn mpc_schedule(p: &CruiseParams, m: usize) -> Result<DisturbanceSchedule> {
    Ok(DisturbanceSchedule::uniform(BoxSet::interval(p.w_min, p.w_max)?, m)?)
}

/// Number of slices per family: the loop of the offline algorithm run with
/// integer arithmetic, including the first slice at or past the far bound.
pub fn slice_count(p: &CruiseParams, m: usize, step_accel: f64) -> usize {
    let step = m as f64 * p.ts * step_accel.abs();
    let ratio = (p.v_max - p.v_min) / step;
    (ratio - 1e-9 * ratio.max(1.0)).ceil().max(0.0) as usize + 1
}

/// Slices of the scenario-(i) (front car braking) and scenario-(ii) (front
/// car accelerating) invariant families for one hold length.
#[derive(Debug)]
pub struct SliceFamily {
    pub hold: usize,
    pub ts: f64,
    /// `lower[k]` lives at `v0 = lower_base + k·lower_step`.
    pub lower: Vec<Polytope>,
    pub lower_base: f64,
    pub lower_step: f64,
    /// `upper[k]` lives at `v0 = upper_base + k·upper_step` (`upper_step < 0`).
    pub upper: Vec<Polytope>,
    pub upper_base: f64,
    pub upper_step: f64,
    pub lower_iterations: usize,
    pub upper_iterations: usize,
    cache: Mutex<HashMap<(usize, usize), Arc<Polytope>>>,
}

impl SliceFamily {
    pub fn new(
        hold: usize,
        ts: f64,
        (lower, lower_base, lower_step): (Vec<Polytope>, f64, f64),
        (upper, upper_base, upper_step): (Vec<Polytope>, f64, f64),
    ) -> SliceFamily {
        SliceFamily {
            hold,
            ts,
            lower,
            lower_base,
            lower_step,
            upper,
            upper_base,
            upper_step,
            lower_iterations: 0,
            upper_iterations: 0,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn lower_velocity(&self, k: usize) -> f64 {
        self.lower_base + k as f64 * self.lower_step
    }

    pub fn upper_velocity(&self, k: usize) -> f64 {
        self.upper_base + k as f64 * self.upper_step
    }

    /// `(d, v1)` cross-section of a stored slice, as a cylinder along `v0`.
    pub fn lower_section(&self, k: usize) -> Result<Polytope> {
        Ok(self.lower[k].cylinder_at(V0, self.lower_velocity(k))?)
    }

    pub fn upper_section(&self, k: usize) -> Result<Polytope> {
        Ok(self.upper[k].cylinder_at(V0, self.upper_velocity(k))?)
    }

    /// Intersection of the two sections, memoised per index pair.
    pub fn section_pair(&self, l: usize, h: usize) -> Result<Arc<Polytope>> {
        if let Some(p) = self.cache.lock().expect("cache lock").get(&(l, h)) {
            return Ok(p.clone());
        }
        let p = Arc::new(self.lower_section(l)?.intersect(&self.upper_section(h)?)?);
        self.cache.lock().expect("cache lock").insert((l, h), p.clone());
        Ok(p)
    }
}

/// Fixed point from `X_v` under a constant front car, then one controllable
/// step per slice under the deterministic extreme `w`.
fn family(
    p: &CruiseParams,
    sys: &LtiSystem,
    m: usize,
    base: f64,
    w: f64,
    name: &'static str,
    opts: &FixedPointOptions,
) -> Result<(Vec<Polytope>, usize)> {
    let x = state_constraints(p);
    let u = input_constraints(p);
    let still = DisturbanceSchedule::zero(1, m)?;
    let init = velocity_slab(p, base);
    let fp = sets::max_control_invariant_from(sys, &init, &x, &u, &still, m, opts)?;
    if fp.set.is_empty() {
        return Err(CruiseError::EmptySlice { family: name, index: 0 });
    }
    let push = DisturbanceSchedule::singleton(&[w], m)?;
    let count = slice_count(p, m, w);
    let mut out = Vec::with_capacity(count);
    out.push(fp.set);
    for k in 1..count {
        let next = sets::pre_m(sys, &x, &u, &out[k - 1], &push, m)?.intersect(&x)?;
        if next.is_empty() {
            return Err(CruiseError::EmptySlice { family: name, index: k });
        }
        out.push(next);
    }
    Ok((out, fp.iterations))
}

/// Both slice families for hold length `m`.
pub fn offline_families(p: &CruiseParams, m: usize) -> Result<SliceFamily> {
    offline_families_with(p, m, &FixedPointOptions::default())
}

pub fn offline_families_with(p: &CruiseParams, m: usize, opts: &FixedPointOptions) -> Result<SliceFamily> {
    p.validate()?;
    if m == 0 {
        return Err(CruiseError::InvalidParams("M: must be positive".into()));
    }
    let sys = build_system(p)?;
    let (lower, upper) = rayon::join(
        || family(p, &sys, m, p.v_min, p.w_min, "lower", opts),
        || family(p, &sys, m, p.v_max, p.w_max, "upper", opts),
    );
    let (lower, li) = lower?;
    let (upper, ui) = upper?;
    let step = m as f64 * p.ts;
    let mut fam = SliceFamily::new(
        m,
        p.ts,
        (lower, p.v_min, -step * p.w_min),
        (upper, p.v_max, -step * p.w_max),
    );
    fam.lower_iterations = li;
    fam.upper_iterations = ui;
    Ok(fam)
}

/// Indices `(l, h)` picked for the current front velocity: the lower slice
/// at or below the braking bound and the upper slice at or above the
/// accelerating bound after one hold.
pub fn slice_indices(fam: &SliceFamily, v0_now: f64, p: &CruiseParams) -> (usize, usize) {
    let m = fam.hold as f64;
    let v_lo = v0_now + m * p.ts * p.w_min;
    let v_hi = v0_now + m * p.ts * p.w_max;
    let pick = |x: f64, len: usize, which: &str| -> usize {
        let k = (x + 1e-9).floor();
        if k < 0.0 {
            return 0;
        }
        let k = k as usize;
        if k >= len {
            log::warn!("{which} slice index {k} beyond stored family of {len}; clamped");
            return len - 1;
        }
        k
    };
    let l = pick((v_lo - fam.lower_base) / fam.lower_step, fam.lower.len(), "lower");
    let h = pick((v_hi - fam.upper_base) / fam.upper_step, fam.upper.len(), "upper");
    (l, h)
}

/// Conservative slice of the invariant set for the current front velocity.
pub fn online_slice(fam: &SliceFamily, v0_now: f64, p: &CruiseParams) -> Result<Arc<Polytope>> {
    let (l, h) = slice_indices(fam, v0_now, p);
    let s = fam.section_pair(l, h)?;
    if cfg!(debug_assertions) {
        debug_assert!(fam.lower_section(l)?.contains(&s, 1e-6)?);
        debug_assert!(fam.upper_section(h)?.contains(&s, 1e-6)?);
    }
    Ok(s)
}
