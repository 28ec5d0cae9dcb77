use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use super::scenario::{make_scenario, FrontCarScenario, ScenarioKind};
use super::{
    build_system, input_constraints, mpc_schedule, offline_families_with, online_slice, slice_indices, state_constraints,
    CruiseError, CruiseParams, Result, SliceFamily, StudyConfig, SupervisorConfig, V0,
};
use crate::mpc::{
    self, AdaptiveSupervisor, MpcError, MpcProblem, MpcSetup, MpcWeights, SequenceBound, SimTrace, Target,
    TraceLabels,
};
use crate::polytope::{Polytope, Support};
use crate::sets::{read_archive, write_archive, ArchiveManifest, DisturbanceSchedule, FixedPointOptions, HoldConfig};

pub fn labels() -> TraceLabels {
    TraceLabels {
        state: vec!["d".into(), "v1".into(), "v0".into()],
        input: vec!["u".into()],
        disturbance: vec!["w".into()],
    }
}

fn to_mpc(e: CruiseError) -> MpcError {
    match e {
        CruiseError::Mpc(e) => e,
        CruiseError::Polytope(e) => MpcError::Polytope(e),
        CruiseError::Sets(e) => MpcError::Sets(e),
        other => MpcError::Ladder(other.to_string()),
    }
}

/// MPC for one hold length with the online slice as reach target.
#[derive(Debug)]
pub struct CruiseController {
    pub params: CruiseParams,
    pub problem: MpcProblem,
    pub family: Arc<SliceFamily>,
}

impl CruiseController {
    pub fn new(p: &CruiseParams, family: Arc<SliceFamily>) -> Result<CruiseController> {
        let m = family.hold;
        let pd = p.p_diag();
        let setup = MpcSetup {
            system: build_system(p)?,
            hold: HoldConfig::new(m, p.horizon)?,
            state_set: state_constraints(p),
            input_set: input_constraints(p),
            schedule: mpc_schedule(p, m)?,
            weights: MpcWeights::diagonal(&p.q_diag, &[p.r], &pd),
            reach_target: state_constraints(p),
            sequence_bound: Some(Arc::new(FrontCarBound::new(p))),
        };
        Ok(CruiseController { params: p.clone(), problem: MpcProblem::new(setup)?, family })
    }

    pub fn hold(&self) -> usize {
        self.family.hold
    }

    /// Online slice for the front velocity in `x`, keyed by its indices.
    pub fn target(&self, x: &DVector<f64>) -> std::result::Result<Target, MpcError> {
        let v0 = x[V0].clamp(self.params.v_min, self.params.v_max);
        let (l, h) = slice_indices(&self.family, v0, &self.params);
        let set = online_slice(&self.family, v0, &self.params).map_err(to_mpc)?;
        Ok(Target::keyed(set, ((l as u64) << 32) | h as u64))
    }
}

/// Front-car accelerations possible over a hold from the measured `v0`:
/// within `[w_min, w_max]` and keeping `v0` inside `[v_min, v_max]`.
#[derive(Debug, Clone)]
pub struct FrontCarBound {
    ts: f64,
    v: (f64, f64),
    w: (f64, f64),
}

impl FrontCarBound {
    pub fn new(p: &CruiseParams) -> FrontCarBound {
        FrontCarBound { ts: p.ts, v: (p.v_min, p.v_max), w: (p.w_min, p.w_max) }
    }

    /// The sequences as a polytope in `R^h`.
    pub fn sequences(&self, v0: f64, h: usize) -> Polytope {
        let v0 = v0.clamp(self.v.0, self.v.1);
        let mut rows = Vec::with_capacity(4 * h);
        for j in 0..h {
            let mut e = vec![0.0; h];
            e[j] = 1.0;
            rows.push((e.clone(), self.w.1));
            e[j] = -1.0;
            rows.push((e, -self.w.0));
        }
        if self.ts > 0.0 {
            for k in 1..=h {
                let mut s = vec![0.0; h];
                s[..k].iter_mut().for_each(|v| *v = self.ts);
                rows.push((s.clone(), self.v.1 - v0));
                rows.push((s.iter().map(|v| -v).collect(), v0 - self.v.0));
            }
        }
        Polytope::from_rows(h, &rows).expect("finite bounds")
    }
}

impl SequenceBound for FrontCarBound {
    fn support(&self, x: &DVector<f64>, coeffs: &[DVector<f64>]) -> std::result::Result<f64, MpcError> {
        let g: Vec<f64> = coeffs.iter().map(|c| c[0]).collect();
        match self.sequences(x[V0], g.len()).support(&g)? {
            Support::Finite(s) => Ok(s),
            _ => Err(MpcError::SolverFailure("front-car sequence set is empty".into())),
        }
    }
}

/// Slice families for each hold length, computed in parallel.
pub fn families_for(p: &CruiseParams, holds: &[usize]) -> Result<BTreeMap<usize, Arc<SliceFamily>>> {
    families_for_with(p, holds, &FixedPointOptions::default())
}

pub fn families_for_with(
    p: &CruiseParams,
    holds: &[usize],
    opts: &FixedPointOptions,
) -> Result<BTreeMap<usize, Arc<SliceFamily>>> {
    let mut uniq: Vec<usize> = holds.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    let fams = uniq
        .par_iter()
        .map(|&m| offline_families_with(p, m, opts).map(|f| (m, Arc::new(f))))
        .collect::<Result<Vec<_>>>()?;
    Ok(fams.into_iter().collect())
}

#[derive(Debug, Clone)]
pub struct StudyRun {
    pub name: String,
    pub trace: SimTrace,
}

impl StudyRun {
    pub fn min_distance(&self) -> f64 {
        self.trace.state_series(0).into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn final_ego_velocity(&self) -> f64 {
        self.trace.final_state()[1]
    }

    /// Mean distance over states `range` (clipped to the trace).
    pub fn mean_distance(&self, range: std::ops::Range<usize>) -> f64 {
        let d = self.trace.state_series(0);
        let hi = range.end.min(d.len());
        let lo = range.start.min(hi);
        if hi == lo {
            return f64::NAN;
        }
        d[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
    }

    pub fn ok(&self) -> bool {
        self.trace.halted.is_none() && self.trace.violations() == 0 && self.trace.final_violation != Some(true)
    }
}

fn run_one(
    p: &CruiseParams,
    ladder: &[&CruiseController],
    scenario: &mut FrontCarScenario,
    steps: usize,
    supervisor: Option<&mut AdaptiveSupervisor>,
) -> Result<SimTrace> {
    let targets: Vec<Box<mpc::TargetFn<'_>>> =
        ladder.iter().map(|c| Box::new(move |x: &DVector<f64>| c.target(x)) as Box<mpc::TargetFn<'_>>).collect();
    let rungs: Vec<(&MpcProblem, &mpc::TargetFn<'_>)> =
        ladder.iter().zip(&targets).map(|(c, t)| (&c.problem, t.as_ref())).collect();
    let x0 = DVector::from_column_slice(&p.x0);
    Ok(mpc::simulate_adaptive(&rungs, &x0, scenario, steps, Some(labels()), supervisor)?)
}

/// Fixed-hold runs under `scenario`, one per family, in parallel.
pub fn brake_study(
    p: &CruiseParams,
    families: &BTreeMap<usize, Arc<SliceFamily>>,
    holds: &[usize],
    scenario: &super::ScenarioConfig,
) -> Result<Vec<StudyRun>> {
    let steps = steps_for(p, scenario.duration_s);
    holds
        .par_iter()
        .map(|&m| {
            let fam = families.get(&m).ok_or_else(|| CruiseError::InvalidParams(format!("no slice family for M = {m}")))?;
            let ctrl = CruiseController::new(p, fam.clone())?;
            let mut sc = make_scenario(scenario, p)?;
            let trace = run_one(p, &[&ctrl], &mut sc, steps, None)?;
            Ok(StudyRun { name: format!("brake_M{m}"), trace })
        })
        .collect()
}

/// Constant front velocity, starting at the first ladder entry with the
/// settling supervisor.
pub fn adaptive_study(
    p: &CruiseParams,
    families: &BTreeMap<usize, Arc<SliceFamily>>,
    sup: &SupervisorConfig,
    duration_s: f64,
) -> Result<(StudyRun, AdaptiveSupervisor)> {
    let ctrls = sup
        .ladder
        .iter()
        .map(|m| {
            let fam = families.get(m).ok_or_else(|| CruiseError::InvalidParams(format!("no slice family for M = {m}")))?;
            CruiseController::new(p, fam.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&CruiseController> = ctrls.iter().collect();
    let mut supervisor = AdaptiveSupervisor::new(sup.trigger_pct, p.steps_per(sup.window_s), 0);
    supervisor.allow_increase = sup.allow_increase;
    let mut sc = FrontCarScenario::new(ScenarioKind::ConstantVelocity, 0, p);
    let trace = run_one(p, &refs, &mut sc, steps_for(p, duration_s), Some(&mut supervisor))?;
    Ok((StudyRun { name: "adaptive".into(), trace }, supervisor))
}

fn steps_for(p: &CruiseParams, seconds: f64) -> usize {
    if seconds <= 0.0 {
        0
    } else {
        p.steps_per(seconds)
    }
}

#[derive(Debug)]
pub struct StudyOutput {
    pub families: BTreeMap<usize, Arc<SliceFamily>>,
    pub brake: Vec<StudyRun>,
    pub adaptive: Option<StudyRun>,
    pub switch_log: Vec<mpc::SwitchEvent>,
}

/// Brake study for every configured hold and the adaptive study; with
/// `out`, writes slice archives and trace CSVs there.
pub fn run_study(cfg: &StudyConfig, out: Option<&Path>, force: bool) -> Result<StudyOutput> {
    cfg.validate()?;
    let p = &cfg.params;
    let mut holds = p.holds.clone();
    holds.extend(&cfg.supervisor.ladder);
    let families = families_for(p, &holds)?;
    if let Some(dir) = out {
        for fam in families.values() {
            write_family(dir, p, fam, force)?;
        }
    }
    let duration = cfg.scenario.duration_s;
    if duration <= 0.0 {
        return Ok(StudyOutput { families, brake: Vec::new(), adaptive: None, switch_log: Vec::new() });
    }
    let brake = brake_study(p, &families, &p.holds, &cfg.scenario)?;
    let (adaptive, sup) = adaptive_study(p, &families, &cfg.supervisor, duration)?;
    if let Some(dir) = out {
        for run in brake.iter().chain(std::iter::once(&adaptive)) {
            run.trace.write_csv(&dir.join(format!("{}.csv", run.name)))?;
        }
    }
    Ok(StudyOutput { families, brake, adaptive: Some(adaptive), switch_log: sup.events })
}

fn manifest(p: &CruiseParams, m: usize, w: f64, base: f64, step: f64, count: usize, which: &str) -> Result<ArchiveManifest> {
    let mut extra = BTreeMap::new();
    extra.insert("family".to_string(), which.to_string());
    extra.insert("v0_base".to_string(), format!("{base}"));
    extra.insert("v0_step".to_string(), format!("{step}"));
    Ok(ArchiveManifest {
        system_hash: build_system(p)?.hash(),
        hold: m,
        schedule: DisturbanceSchedule::singleton(&[w], m)?.describe(),
        slices: count,
        extra,
    })
}

/// `<dir>/M<m>/lower` and `<dir>/M<m>/upper`.
pub fn family_dirs(dir: &Path, m: usize) -> (std::path::PathBuf, std::path::PathBuf) {
    let base = dir.join(format!("M{m}"));
    (base.join("lower"), base.join("upper"))
}

pub fn write_family(dir: &Path, p: &CruiseParams, fam: &SliceFamily, force: bool) -> Result<()> {
    let (lo, hi) = family_dirs(dir, fam.hold);
    if !force && (lo.join("manifest").exists() || hi.join("manifest").exists()) {
        return Err(CruiseError::Io(format!("archive for M = {} exists under {}", fam.hold, dir.display())));
    }
    let ml = manifest(p, fam.hold, p.w_min, fam.lower_base, fam.lower_step, fam.lower.len(), "lower")?;
    let mu = manifest(p, fam.hold, p.w_max, fam.upper_base, fam.upper_step, fam.upper.len(), "upper")?;
    write_archive(&lo, &ml, &fam.lower, force)?;
    write_archive(&hi, &mu, &fam.upper, force)?;
    Ok(())
}

/// Loads a family written by [`write_family`], checking it was computed
/// for the same model.
pub fn read_family(dir: &Path, p: &CruiseParams, m: usize) -> Result<SliceFamily> {
    let (lo, hi) = family_dirs(dir, m);
    let hash = build_system(p)?.hash();
    let load = |d: &Path| -> Result<(Vec<Polytope>, f64, f64)> {
        let (man, slices) = read_archive(d)?;
        if man.system_hash != hash || man.hold != m {
            return Err(CruiseError::InvalidParams(format!(
                "{}: archive is for another model or hold length",
                d.display()
            )));
        }
        let base = man.extra_f64("v0_base").ok_or_else(|| CruiseError::Io("manifest lacks v0_base".into()))?;
        let step = man.extra_f64("v0_step").ok_or_else(|| CruiseError::Io("manifest lacks v0_step".into()))?;
        Ok((slices, base, step))
    };
    Ok(SliceFamily::new(m, p.ts, load(&lo)?, load(&hi)?))
}
