//! Closed-loop simulation under the hold policy.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::switch::{check_switch, AdaptiveSupervisor, SwitchDecision, SwitchEvent, SwitchRequest};
use super::{MpcError, MpcProblem, MpcSolution, Result, Target};
use crate::sets::DisturbanceSchedule;

/// Normalised row excess above which a state or input counts as a
/// constraint violation.
pub const VIOLATION_TOL: f64 = 1e-9;

/// Source of the disturbance applied at each step.
pub trait DisturbanceSource {
    fn sample(&mut self, t: usize, x: &DVector<f64>) -> DVector<f64>;
}

impl<F: FnMut(usize, &DVector<f64>) -> DVector<f64>> DisturbanceSource for F {
    fn sample(&mut self, t: usize, x: &DVector<f64>) -> DVector<f64> {
        self(t, x)
    }
}

pub struct ZeroDisturbance(pub usize);

impl DisturbanceSource for ZeroDisturbance {
    fn sample(&mut self, _t: usize, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.0)
    }
}

/// Fixed sequence, zero after it runs out.
pub struct SequenceDisturbance {
    pub values: Vec<DVector<f64>>,
    pub dim: usize,
}

impl DisturbanceSource for SequenceDisturbance {
    fn sample(&mut self, t: usize, _x: &DVector<f64>) -> DVector<f64> {
        self.values.get(t).cloned().unwrap_or_else(|| DVector::zeros(self.dim))
    }
}

/// Uniform samples from the schedule set active at `t mod M`, by rejection
/// from its bounding box.
pub struct ScheduleSampler {
    schedule: DisturbanceSchedule,
    rng: ChaCha8Rng,
}

impl ScheduleSampler {
    pub fn new(schedule: DisturbanceSchedule, seed: u64) -> ScheduleSampler {
        ScheduleSampler { schedule, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl DisturbanceSource for ScheduleSampler {
    fn sample(&mut self, t: usize, _x: &DVector<f64>) -> DVector<f64> {
        let set = self.schedule.set(t);
        let Ok(Some((lo, hi))) = set.bounding_box() else {
            return DVector::zeros(self.schedule.dim());
        };
        for _ in 0..10_000 {
            let w: Vec<f64> =
                (0..lo.len()).map(|i| if hi[i] > lo[i] { self.rng.gen_range(lo[i]..=hi[i]) } else { lo[i] }).collect();
            if set.contains_point(&w, 1e-12) {
                return DVector::from_vec(w);
            }
        }
        DVector::zeros(self.schedule.dim())
    }
}

/// Column names for CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceLabels {
    pub state: Vec<String>,
    pub input: Vec<String>,
    pub disturbance: Vec<String>,
}

impl TraceLabels {
    pub fn generic(n: usize, m: usize, o: usize) -> TraceLabels {
        let names = |p: &str, k: usize| -> Vec<String> {
            if k == 1 {
                vec![p.to_string()]
            } else {
                (0..k).map(|i| format!("{p}{i}")).collect()
            }
        };
        TraceLabels { state: (0..n).map(|i| format!("x{i}")).collect(), input: names("u", m), disturbance: names("w", o) }
    }
}

/// States `x_0 … x_T` and, per step `t < T`, the applied input and
/// disturbance with solver bookkeeping.
#[derive(Debug, Clone)]
pub struct SimTrace {
    pub ts: f64,
    pub labels: TraceLabels,
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub disturbances: Vec<DVector<f64>>,
    /// Hold length in force at each step.
    pub holds: Vec<usize>,
    /// A fresh QP was solved at this step.
    pub solved: Vec<bool>,
    pub viol_x: Vec<bool>,
    pub viol_u: Vec<bool>,
    pub objectives: Vec<Option<f64>>,
    pub switches: Vec<SwitchEvent>,
    /// Set when a re-solve was infeasible; the trace stops at that state.
    pub halted: Option<MpcError>,
    pub final_violation: Option<bool>,
}

impl SimTrace {
    fn new(ts: f64, labels: TraceLabels, x0: DVector<f64>) -> SimTrace {
        SimTrace {
            ts,
            labels,
            states: vec![x0],
            inputs: Vec::new(),
            disturbances: Vec::new(),
            holds: Vec::new(),
            solved: Vec::new(),
            viol_x: Vec::new(),
            viol_u: Vec::new(),
            objectives: Vec::new(),
            switches: Vec::new(),
            halted: None,
            final_violation: None,
        }
    }

    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("initial state")
    }

    pub fn state_series(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|x| x[i]).collect()
    }

    pub fn violations(&self) -> usize {
        self.viol_x.iter().chain(&self.viol_u).filter(|v| **v).count()
    }

    pub fn csv_header(&self) -> String {
        let mut cols = vec!["t".to_string(), "time_s".to_string()];
        cols.extend(self.labels.state.iter().cloned());
        cols.extend(self.labels.input.iter().cloned());
        cols.extend(self.labels.disturbance.iter().cloned());
        cols.extend(["M", "solved", "feasible", "viol_X", "viol_U"].map(String::from));
        cols.join(",")
    }

    /// One row per step, then a row for the last state with blank input
    /// and disturbance columns.
    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        let (nu, nw) = (self.labels.input.len(), self.labels.disturbance.len());
        for (t, x) in self.states.iter().enumerate() {
            let _ = write!(out, "{t},{}", t as f64 * self.ts);
            for v in x.iter() {
                let _ = write!(out, ",{v}");
            }
            if t < self.steps() {
                for v in self.inputs[t].iter().chain(self.disturbances[t].iter()) {
                    let _ = write!(out, ",{v}");
                }
                let _ = writeln!(
                    out,
                    ",{},{},1,{},{}",
                    self.holds[t],
                    self.solved[t] as u8,
                    self.viol_x[t] as u8,
                    self.viol_u[t] as u8
                );
            } else {
                out.push_str(&",".repeat(nu + nw));
                let hold = self.holds.last().copied().unwrap_or(0);
                let feasible = if self.halted.is_some() { 0 } else { 1 };
                let vx = self.final_violation.unwrap_or(false) as u8;
                let _ = writeln!(out, ",{hold},0,{feasible},{vx},0");
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| MpcError::Io(format!("{}: {e}", path.display())))
    }
}

/// Input returned by one policy step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub input: DVector<f64>,
    pub solved: bool,
    pub solution: Option<MpcSolution>,
}

/// Re-solves at hold boundaries and repeats the held input in between.
#[derive(Debug, Clone, Default)]
pub struct HoldPolicy {
    held: Option<DVector<f64>>,
    phase: usize,
}

impl HoldPolicy {
    pub fn new() -> HoldPolicy {
        HoldPolicy::default()
    }

    /// Next step re-solves; used after a hold-length switch.
    pub fn reset(&mut self) {
        self.held = None;
        self.phase = 0;
    }

    pub fn at_boundary(&self) -> bool {
        self.phase == 0
    }

    pub fn step(&mut self, prob: &MpcProblem, target: &Target, x: &DVector<f64>, t: usize) -> Result<StepOutcome> {
        let m = prob.hold();
        if self.phase == 0 || self.held.is_none() {
            let sol = prob.solve_with(x, target)?;
            let Some(u) = sol.first_input().cloned() else {
                return Err(MpcError::InfeasibleAtResolve { t, x: x.iter().copied().collect() });
            };
            self.held = Some(u.clone());
            self.phase = 1 % m;
            return Ok(StepOutcome { input: u, solved: true, solution: Some(sol) });
        }
        self.phase = (self.phase + 1) % m;
        Ok(StepOutcome { input: self.held.clone().expect("held input"), solved: false, solution: None })
    }
}

/// Maps the current state to the reach target of a problem.
pub type TargetFn<'a> = dyn Fn(&DVector<f64>) -> Result<Target> + 'a;

/// Fixed-hold closed loop with the problem's default reach target.
pub fn simulate(
    prob: &MpcProblem,
    x0: &DVector<f64>,
    source: &mut dyn DisturbanceSource,
    steps: usize,
    labels: Option<TraceLabels>,
) -> Result<SimTrace> {
    let target = prob.default_target();
    let fixed = move |_: &DVector<f64>| Ok(target.clone());
    simulate_adaptive(&[(prob, &fixed)], x0, source, steps, labels, None)
}

/// Closed loop over a ladder of problems, starting with the first. With a
/// supervisor, switches to another rung are proposed at hold boundaries
/// and taken only when the safe-switch test passes.
pub fn simulate_adaptive(
    ladder: &[(&MpcProblem, &TargetFn<'_>)],
    x0: &DVector<f64>,
    source: &mut dyn DisturbanceSource,
    steps: usize,
    labels: Option<TraceLabels>,
    mut supervisor: Option<&mut AdaptiveSupervisor>,
) -> Result<SimTrace> {
    let Some((first, _)) = ladder.first() else {
        return Err(MpcError::Ladder("no problems given".into()));
    };
    let sys = first.system().clone();
    let (n, nu, nw) = (sys.n(), sys.m(), sys.o());
    if x0.len() != n {
        return Err(MpcError::DimensionMismatch(format!("x0 has {} entries, expected {n}", x0.len())));
    }
    if ladder.iter().any(|(p, _)| p.system() != &sys) {
        return Err(MpcError::Ladder("problems disagree on the system".into()));
    }
    let labels = labels.unwrap_or_else(|| TraceLabels::generic(n, nu, nw));
    let mut trace = SimTrace::new(sys.ts(), labels, x0.clone());
    let mut current = 0usize;
    let mut policy = HoldPolicy::new();

    for t in 0..steps {
        let x = trace.states[t].clone();
        if policy.at_boundary() {
            if let Some(sup) = supervisor.as_deref_mut() {
                let holds: Vec<usize> = ladder.iter().map(|(p, _)| p.hold()).collect();
                if let Some(next) = sup.propose(&trace, t, current, &holds) {
                    let (cand, target_of) = ladder[next];
                    let pair = (ladder[current].0.hold(), cand.hold());
                    let event = match target_of(&x) {
                        Ok(target) => {
                            let req = SwitchRequest { hold: cand.hold(), target };
                            match check_switch(&x, &req, cand) {
                                Ok(SwitchDecision::Safe) => match cand.solve_with(&x, &req.target) {
                                    Ok(sol) if sol.is_feasible() => {
                                        current = next;
                                        policy.reset();
                                        SwitchEvent::accepted(t, pair, "safe")
                                    }
                                    _ => SwitchEvent::rejected(t, pair, "candidate QP infeasible".into()),
                                },
                                Ok(SwitchDecision::Unsafe { row, excess, .. }) => SwitchEvent::rejected(
                                    t,
                                    pair,
                                    format!("outside feasible region: row {row} exceeded by {excess:.3e}"),
                                ),
                                Err(e) => SwitchEvent::rejected(t, pair, e.to_string()),
                            }
                        }
                        Err(e) => SwitchEvent::rejected(t, pair, e.to_string()),
                    };
                    log::info!("{event}");
                    sup.record(event.clone());
                    trace.switches.push(event);
                }
            }
        }
        let (prob, target_of) = ladder[current];
        let target = match if policy.at_boundary() { target_of(&x).map(Some) } else { Ok(None) } {
            Ok(t) => t,
            Err(e) => {
                trace.halted = Some(e);
                break;
            }
        };
        let target = target.unwrap_or_else(|| prob.default_target());
        let out = match policy.step(prob, &target, &x, t) {
            Ok(o) => o,
            Err(e @ MpcError::InfeasibleAtResolve { .. }) => {
                log::warn!("{e}");
                trace.halted = Some(e);
                break;
            }
            Err(e) => return Err(e),
        };
        let w = source.sample(t, &x);
        if w.len() != nw {
            return Err(MpcError::DimensionMismatch(format!("disturbance has {} entries, expected {nw}", w.len())));
        }
        let xn = sys.step(&x, &out.input, &w);
        trace.viol_x.push(violates(prob.state_set(), &x));
        trace.viol_u.push(violates(prob.input_set(), &out.input));
        trace.objectives.push(out.solution.as_ref().map(|s| s.objective));
        trace.inputs.push(out.input);
        trace.disturbances.push(w);
        trace.holds.push(prob.hold());
        trace.solved.push(out.solved);
        trace.states.push(xn);
    }
    let last = trace.final_state().clone();
    trace.final_violation = Some(violates(ladder[current].0.state_set(), &last));
    Ok(trace)
}

fn violates(set: &crate::polytope::Polytope, v: &DVector<f64>) -> bool {
    set.max_violation(v.as_slice()).is_some_and(|(_, e)| e > VIOLATION_TOL)
}
