//! Safe hold-length switching.

use std::fmt;

use nalgebra::DVector;

use super::sim::SimTrace;
use super::{MpcError, MpcProblem, Result, Target};

/// Request to continue with hold length `hold` towards `target`.
#[derive(Debug, Clone)]
pub struct SwitchRequest {
    pub hold: usize,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SwitchDecision {
    Safe,
    /// The state violates row `row` (`normal·x ≤ rhs`) of the feasible
    /// region of the new hold length by `excess` (unit-normal units).
    Unsafe { row: usize, normal: Vec<f64>, rhs: f64, excess: f64 },
}

impl SwitchDecision {
    pub fn is_safe(&self) -> bool {
        matches!(self, SwitchDecision::Safe)
    }
}

/// Safe iff `x` lies in `Pre^{M̂}(target) ∩ X` for the candidate problem.
pub fn check_switch(x: &DVector<f64>, req: &SwitchRequest, cand: &MpcProblem) -> Result<SwitchDecision> {
    if req.hold != cand.hold() {
        return Err(MpcError::Ladder(format!("request for M = {} checked against M = {}", req.hold, cand.hold())));
    }
    if x.len() != cand.system().n() {
        return Err(MpcError::DimensionMismatch(format!("state has {} entries", x.len())));
    }
    let region = cand.feasible_region(&req.target)?;
    if region.is_empty() {
        return Ok(SwitchDecision::Unsafe { row: 0, normal: vec![0.0; x.len()], rhs: -1.0, excess: f64::INFINITY });
    }
    match region.max_violation(x.as_slice()) {
        Some((row, excess)) if excess > 0.0 => Ok(SwitchDecision::Unsafe {
            row,
            normal: region.a().row(row).iter().copied().collect(),
            rhs: region.b()[row],
            excess,
        }),
        _ => Ok(SwitchDecision::Safe),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchEvent {
    pub t: usize,
    pub from: usize,
    pub to: usize,
    pub accepted: bool,
    pub reason: String,
}

impl SwitchEvent {
    pub(super) fn accepted(t: usize, (from, to): (usize, usize), reason: &str) -> SwitchEvent {
        SwitchEvent { t, from, to, accepted: true, reason: reason.to_string() }
    }

    pub(super) fn rejected(t: usize, (from, to): (usize, usize), reason: String) -> SwitchEvent {
        SwitchEvent { t, from, to, accepted: false, reason }
    }
}

impl fmt::Display for SwitchEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.accepted { "accepted" } else { "rejected" };
        write!(f, "t={} switch M {} -> {} {verdict}: {}", self.t, self.from, self.to, self.reason)
    }
}

/// Proposes a shorter hold once the monitored state coordinate has moved
/// by less than `trigger_pct` percent over the last `window` steps.
#[derive(Debug, Clone)]
pub struct AdaptiveSupervisor {
    pub trigger_pct: f64,
    pub window: usize,
    pub monitor: usize,
    /// Also propose a longer hold when the coordinate is moving.
    pub allow_increase: bool,
    pub events: Vec<SwitchEvent>,
}

impl AdaptiveSupervisor {
    pub fn new(trigger_pct: f64, window: usize, monitor: usize) -> AdaptiveSupervisor {
        AdaptiveSupervisor { trigger_pct, window: window.max(1), monitor, allow_increase: false, events: Vec::new() }
    }

    /// Index into `holds` to try at step `t`, if any.
    pub fn propose(&self, trace: &SimTrace, t: usize, current: usize, holds: &[usize]) -> Option<usize> {
        if t < self.window || t >= trace.states.len() {
            return None;
        }
        let now = trace.states[t][self.monitor];
        let before = trace.states[t - self.window][self.monitor];
        let settled = (now - before).abs() < self.trigger_pct / 100.0 * before.abs();
        let cur = holds[current];
        if settled {
            (0..holds.len()).filter(|&i| holds[i] < cur).max_by_key(|&i| holds[i])
        } else if self.allow_increase {
            (0..holds.len()).filter(|&i| holds[i] > cur).min_by_key(|&i| holds[i])
        } else {
            None
        }
    }

    pub fn record(&mut self, event: SwitchEvent) {
        self.events.push(event);
    }
}
