//! Robust M-step-hold MPC: condensed QP over the held inputs, tightened by
//! the disturbance reach sets, plus closed-loop simulation and hold-length
//! switching.

mod sim;
mod switch;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::optim::{self, OptimError, QuadraticProgram, SolveStatus, SolverSettings};
use crate::polytope::{Polytope, PolytopeError, Support};
use crate::sets::{self, DisturbanceSchedule, HoldConfig, LtiSystem, SetsError};
use crate::tol::Tolerances;

pub use sim::{
    simulate, simulate_adaptive, DisturbanceSource, HoldPolicy, ScheduleSampler, SequenceDisturbance, SimTrace,
    StepOutcome, TargetFn, TraceLabels, ZeroDisturbance, VIOLATION_TOL,
};
pub use switch::{check_switch, AdaptiveSupervisor, SwitchDecision, SwitchEvent, SwitchRequest};

/// Extra relative tightening on top of `σ_{E_h}` so that a nominal plan
/// sitting exactly on a tightened row keeps the true state strictly inside
/// under the worst-case disturbance despite rounding.
pub const TIGHTEN_MARGIN: f64 = 1e-6;

/// Relative slack granted to an otherwise infeasible QP before it is
/// reported infeasible.
pub const RELAX_SLACK: f64 = 1e-10;

#[derive(Debug, Error, Clone)]
pub enum MpcError {
    #[error(transparent)]
    Sets(#[from] SetsError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("disturbance set {0} does not contain the origin")]
    DisturbanceExcludesOrigin(usize),
    #[error("tightened set at step {0} is empty")]
    EmptyTightenedSet(usize),
    #[error("reach target is empty")]
    EmptyTarget,
    #[error("MPC infeasible at re-solve, t = {t}, x = {x:?}")]
    InfeasibleAtResolve { t: usize, x: Vec<f64> },
    #[error("QP solver did not converge: {0}")]
    SolverFailure(String),
    #[error("hold ladder: {0}")]
    Ladder(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, MpcError>;

/// Stage, input and terminal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcWeights {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

impl MpcWeights {
    pub fn diagonal(q: &[f64], r: &[f64], p: &[f64]) -> MpcWeights {
        MpcWeights {
            q: DMatrix::from_diagonal(&DVector::from_column_slice(q)),
            r: DMatrix::from_diagonal(&DVector::from_column_slice(r)),
            p: DMatrix::from_diagonal(&DVector::from_column_slice(p)),
        }
    }
}

/// State-dependent description of the disturbance sequences possible over
/// one hold, sharper than the schedule boxes (e.g. when the disturbance is
/// an acceleration that stops at a velocity limit).
pub trait SequenceBound: std::fmt::Debug + Send + Sync {
    /// `max Σ_j coeffs[j]·w_j` over the sequences `w_0 … w_{h−1}` that can
    /// occur from state `x`, with `h = coeffs.len()`.
    fn support(&self, x: &DVector<f64>, coeffs: &[DVector<f64>]) -> Result<f64>;
}

/// Everything needed to build an [`MpcProblem`].
#[derive(Debug, Clone)]
pub struct MpcSetup {
    pub system: LtiSystem,
    pub hold: HoldConfig,
    pub state_set: Polytope,
    pub input_set: Polytope,
    /// Disturbance sets over one hold, used for tightening.
    pub schedule: DisturbanceSchedule,
    pub weights: MpcWeights,
    /// Default set the state must reach, robustly, after the first hold.
    pub reach_target: Polytope,
    /// When set, tightening uses this instead of the error sets of the
    /// schedule, re-evaluated at every solve.
    pub sequence_bound: Option<Arc<dyn SequenceBound>>,
}

/// A reach target with an optional cache key for its tightened form.
#[derive(Debug, Clone)]
pub struct Target {
    pub set: Arc<Polytope>,
    pub key: Option<u64>,
}

impl Target {
    pub fn keyed(set: Arc<Polytope>, key: u64) -> Target {
        Target { set, key: Some(key) }
    }

    pub fn uncached(set: Polytope) -> Target {
        Target { set: Arc::new(set), key: None }
    }
}

const DEFAULT_KEY: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpcStatus {
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct MpcSolution {
    pub status: MpcStatus,
    /// One input per hold, `N/M` of them; empty when infeasible.
    pub inputs: Vec<DVector<f64>>,
    /// Nominal states `x̄_0 … x̄_N`; empty when infeasible.
    pub nominal: Vec<DVector<f64>>,
    pub objective: f64,
    pub iterations: usize,
}

impl MpcSolution {
    pub fn is_feasible(&self) -> bool {
        self.status == MpcStatus::Feasible
    }

    pub fn first_input(&self) -> Option<&DVector<f64>> {
        self.inputs.first()
    }
}

/// A condensed QP together with the constant part of the cost.
#[derive(Debug, Clone)]
pub struct AssembledQp {
    pub qp: QuadraticProgram,
    pub constant: f64,
    /// Magnitude of each inequality row before the initial state was
    /// substituted; the scale for round-off in that row.
    pub row_scale: DVector<f64>,
}

#[derive(Debug)]
pub struct MpcProblem {
    setup: MpcSetup,
    /// `E_1 … E_M`.
    error_sets: Vec<Polytope>,
    /// `X ⊖ E_h` for `h = 1 … M−1`.
    tightened_x: Vec<Polytope>,
    /// `A^k`, `k = 0 … N`.
    phi: Vec<DMatrix<f64>>,
    /// Effect of the stacked held inputs on `x̄_k`, `k = 0 … N`.
    gamma: Vec<DMatrix<f64>>,
    hessian: DMatrix<f64>,
    tol: Tolerances,
    targets: Mutex<HashMap<u64, Arc<Polytope>>>,
    regions: Mutex<HashMap<u64, Arc<Polytope>>>,
}

fn check_weight(name: &str, w: &DMatrix<f64>, dim: usize, definite: bool) -> Result<()> {
    if w.nrows() != dim || w.ncols() != dim {
        return Err(MpcError::InvalidWeights(format!("{name} is {}x{}, expected {dim}x{dim}", w.nrows(), w.ncols())));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(MpcError::InvalidWeights(format!("{name} has non-finite entries")));
    }
    let scale = 1.0 + w.amax();
    if (w - w.transpose()).amax() > 1e-12 * scale {
        return Err(MpcError::InvalidWeights(format!("{name} is not symmetric")));
    }
    let min_eig = SymmetricEigen::new(w.clone()).eigenvalues.min();
    if definite && !(min_eig > 1e-12 * scale) {
        return Err(MpcError::InvalidWeights(format!("{name} is not positive definite (min eigenvalue {min_eig:.3e})")));
    }
    if !definite && min_eig < -1e-12 * scale {
        return Err(MpcError::InvalidWeights(format!(
            "{name} is not positive semidefinite (min eigenvalue {min_eig:.3e})"
        )));
    }
    Ok(())
}

/// `set ⊖ e`, with each offset pulled in by a further `TIGHTEN_MARGIN`
/// share of the support of `e` on that row.
pub fn tighten(set: &Polytope, e: &Polytope) -> Result<Polytope> {
    if set.dim() != e.dim() {
        return Err(MpcError::DimensionMismatch(format!("set in R^{}, error set in R^{}", set.dim(), e.dim())));
    }
    let mut rows = Vec::with_capacity(set.nrows());
    for i in 0..set.nrows() {
        let dir: Vec<f64> = set.a().row(i).iter().copied().collect();
        let mut rhs = set.b()[i];
        if dir.iter().any(|v| *v != 0.0) {
            match e.support(&dir)? {
                Support::Finite(s) => rhs -= s + TIGHTEN_MARGIN * s.abs(),
                Support::Unbounded => return Err(PolytopeError::UnboundedSubtrahend.into()),
                Support::Empty => return Err(PolytopeError::EmptySubtrahend.into()),
            }
        }
        rows.push((dir, rhs));
    }
    Ok(Polytope::from_rows(set.dim(), &rows)?)
}

impl MpcProblem {
    pub fn new(setup: MpcSetup) -> Result<MpcProblem> {
        Self::with_tolerances(setup, Tolerances::DEFAULT)
    }

    pub fn with_tolerances(setup: MpcSetup, tol: Tolerances) -> Result<MpcProblem> {
        let sys = &setup.system;
        let (n, nu) = (sys.n(), sys.m());
        let m = setup.hold.hold();
        let big_n = setup.hold.horizon();
        let holds = setup.hold.holds();
        if setup.state_set.dim() != n || setup.reach_target.dim() != n {
            return Err(MpcError::DimensionMismatch(format!("state sets must live in R^{n}")));
        }
        if setup.input_set.dim() != nu {
            return Err(MpcError::DimensionMismatch(format!("input set must live in R^{nu}")));
        }
        if setup.schedule.len() != m {
            return Err(SetsError::ScheduleLength { expected: m, got: setup.schedule.len() }.into());
        }
        check_weight("Q", &setup.weights.q, n, false)?;
        check_weight("P", &setup.weights.p, n, false)?;
        check_weight("R", &setup.weights.r, nu, true)?;
        let zero = vec![0.0; setup.schedule.dim()];
        for j in 0..m {
            if !setup.schedule.set(j).contains_point(&zero, 1e-12) {
                return Err(MpcError::DisturbanceExcludesOrigin(j));
            }
        }
        if setup.reach_target.is_empty() {
            return Err(MpcError::EmptyTarget);
        }

        let error_sets = sets::error_sets(sys, &setup.schedule, m)?;
        let mut tightened_x = Vec::with_capacity(m.saturating_sub(1));
        for h in 1..m {
            let t = tighten(&setup.state_set, &error_sets[h - 1])?;
            if t.is_empty() {
                return Err(MpcError::EmptyTightenedSet(h));
            }
            tightened_x.push(t);
        }

        let mut phi = vec![DMatrix::identity(n, n)];
        for k in 0..big_n {
            let next = sys.a() * &phi[k];
            phi.push(next);
        }
        let cols = holds * nu;
        let mut gamma = vec![DMatrix::zeros(n, cols)];
        for k in 0..big_n {
            // x̄_{k+1} = A x̄_k + B ū_{⌊k/M⌋}
            let mut next = sys.a() * &gamma[k];
            let j = k / m;
            let mut blk = next.view_mut((0, j * nu), (n, nu));
            blk += sys.b();
            gamma.push(next);
        }

        let w = &setup.weights;
        let mut hessian = DMatrix::zeros(cols, cols);
        for k in 1..=big_n {
            let wk = if k == big_n { &w.p } else { &w.q };
            hessian += gamma[k].transpose() * wk * &gamma[k];
        }
        for j in 0..holds {
            let mut blk = hessian.view_mut((j * nu, j * nu), (nu, nu));
            blk += &w.r * (m as f64);
        }
        hessian *= 2.0;
        hessian = (&hessian + hessian.transpose()) * 0.5;

        Ok(MpcProblem {
            setup,
            error_sets,
            tightened_x,
            phi,
            gamma,
            hessian,
            tol,
            targets: Mutex::new(HashMap::new()),
            regions: Mutex::new(HashMap::new()),
        })
    }

    pub fn system(&self) -> &LtiSystem {
        &self.setup.system
    }

    pub fn hold(&self) -> usize {
        self.setup.hold.hold()
    }

    pub fn horizon(&self) -> usize {
        self.setup.hold.horizon()
    }

    pub fn state_set(&self) -> &Polytope {
        &self.setup.state_set
    }

    pub fn input_set(&self) -> &Polytope {
        &self.setup.input_set
    }

    pub fn schedule(&self) -> &DisturbanceSchedule {
        &self.setup.schedule
    }

    pub fn weights(&self) -> &MpcWeights {
        &self.setup.weights
    }

    pub fn error_sets(&self) -> &[Polytope] {
        &self.error_sets
    }

    pub fn default_target(&self) -> Target {
        Target::keyed(Arc::new(self.setup.reach_target.clone()), DEFAULT_KEY)
    }

    fn cached(
        &self,
        map: &Mutex<HashMap<u64, Arc<Polytope>>>,
        target: &Target,
        build: impl FnOnce() -> Result<Polytope>,
    ) -> Result<Arc<Polytope>> {
        if let Some(k) = target.key {
            if let Some(p) = map.lock().expect("cache lock").get(&k) {
                return Ok(p.clone());
            }
        }
        let p = Arc::new(build()?);
        if let Some(k) = target.key {
            map.lock().expect("cache lock").insert(k, p.clone());
        }
        Ok(p)
    }

    /// `target ⊖ E_M`, cached by key.
    pub fn tightened_target(&self, target: &Target) -> Result<Arc<Polytope>> {
        let m = self.hold();
        self.cached(&self.targets, target, || {
            if target.set.dim() != self.system().n() {
                return Err(MpcError::DimensionMismatch("reach target dimension".into()));
            }
            let t = tighten(&target.set, &self.error_sets[m - 1])?;
            if t.is_empty() {
                return Err(MpcError::EmptyTightenedSet(m));
            }
            Ok(t)
        })
    }

    /// States from which one robust hold reaches `target` inside the state
    /// set: `Pre^M(target) ∩ X`, cached by key.
    pub fn feasible_region(&self, target: &Target) -> Result<Arc<Polytope>> {
        let m = self.hold();
        self.cached(&self.regions, target, || {
            let s = &self.setup;
            let ks = sets::controllable_set(&s.system, &s.state_set, &s.input_set, &target.set, &s.schedule, m, m)?;
            Ok(ks.into_iter().last().expect("two sets"))
        })
    }

    /// Condensed QP in the stacked held inputs for initial state `x0`.
    pub fn assemble_qp(&self, x0: &DVector<f64>, target: &Target) -> Result<AssembledQp> {
        let sys = self.system();
        let n = sys.n();
        if x0.len() != n {
            return Err(MpcError::DimensionMismatch(format!("x0 has {} entries, expected {n}", x0.len())));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(OptimError::NonFinite.into());
        }
        let m = self.hold();
        let big_n = self.horizon();
        let cols = self.hessian.ncols();
        let w = &self.setup.weights;
        let (tight_x, target_t): (Vec<Polytope>, Arc<Polytope>) = match &self.setup.sequence_bound {
            None => (self.tightened_x.clone(), self.tightened_target(target)?),
            Some(bound) => {
                let tx = (1..m)
                    .map(|h| self.tighten_along(&self.setup.state_set, h, x0, bound.as_ref()))
                    .collect::<Result<Vec<_>>>()?;
                (tx, Arc::new(self.tighten_along(&target.set, m, x0, bound.as_ref())?))
            }
        };

        let free: Vec<DVector<f64>> = self.phi.iter().map(|p| p * x0).collect();
        let mut cost = DVector::zeros(cols);
        let mut constant = x0.dot(&(&w.q * x0));
        for k in 1..=big_n {
            let wk = if k == big_n { &w.p } else { &w.q };
            let wx = wk * &free[k];
            cost += self.gamma[k].transpose() * &wx * 2.0;
            constant += free[k].dot(&wx);
        }

        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut scales: Vec<f64> = Vec::new();
        let state = &self.setup.state_set;
        for k in 0..big_n.max(m + 1) {
            let mut sets_k: Vec<&Polytope> = Vec::new();
            if k == 0 || (k >= m && k < big_n) {
                sets_k.push(state);
            }
            if k >= 1 && k < m {
                sets_k.push(&tight_x[k - 1]);
            }
            if k == m {
                sets_k.push(&target_t);
            }
            push_state_rows(&mut rows, &mut scales, &sets_k, &self.gamma[k], &free[k]);
        }
        let u = &self.setup.input_set;
        let nu = sys.m();
        for j in 0..self.setup.hold.holds() {
            for i in 0..u.nrows() {
                let mut c = vec![0.0; cols];
                for q in 0..nu {
                    c[j * nu + q] = u.a()[(i, q)];
                }
                rows.push((c, u.b()[i]));
                scales.push(u.b()[i].abs());
            }
        }

        let a = DMatrix::from_fn(rows.len(), cols, |r, c| rows[r].0[c]);
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        Ok(AssembledQp {
            qp: QuadraticProgram::new(self.hessian.clone(), cost, a, b),
            constant,
            row_scale: DVector::from_vec(scales),
        })
    }

    /// `set` tightened for step `h` of a hold started at `x0` under the
    /// sequence bound. The margin scales with the schedule's error set so
    /// rows the disturbance can reach keep some slack even where the bound
    /// says the disturbance cannot act.
    fn tighten_along(&self, set: &Polytope, h: usize, x0: &DVector<f64>, bound: &dyn SequenceBound) -> Result<Polytope> {
        let e = self.system().e();
        let mut rows = Vec::with_capacity(set.nrows());
        for i in 0..set.nrows() {
            let c = set.a().row(i);
            let coeffs: Vec<DVector<f64>> = (0..h).map(|j| (c * &self.phi[h - 1 - j] * e).transpose()).collect();
            let mut rhs = set.b()[i];
            if coeffs.iter().any(|g| g.iter().any(|v| *v != 0.0)) {
                let s = bound.support(x0, &coeffs)?;
                let dir: Vec<f64> = c.iter().copied().collect();
                let s_box = match self.error_sets[h - 1].support(&dir)? {
                    Support::Finite(v) => v.abs(),
                    _ => 0.0,
                };
                rhs -= s + TIGHTEN_MARGIN * s.abs().max(s_box);
            }
            rows.push((c.iter().copied().collect(), rhs));
        }
        Ok(Polytope::from_rows(set.dim(), &rows)?)
    }

    pub fn solve(&self, x0: &DVector<f64>) -> Result<MpcSolution> {
        self.solve_with(x0, &self.default_target())
    }

    pub fn solve_with(&self, x0: &DVector<f64>, target: &Target) -> Result<MpcSolution> {
        let qp = self.assemble_qp(x0, target)?;
        let settings = SolverSettings::with_tol(self.tol.lp);
        let mut res = optim::solve_qp_with(&qp.qp, &settings)?;
        if res.status != SolveStatus::Optimal {
            // States on the boundary of a numerically invariant target can
            // miss it by round-off; allow that much slack before giving up.
            let mut relaxed = qp.qp.clone();
            for i in 0..relaxed.b_ineq.len() {
                relaxed.b_ineq[i] += RELAX_SLACK * (1.0 + qp.row_scale[i]);
            }
            let retry = optim::solve_qp_with(&relaxed, &settings)?;
            if retry.status == SolveStatus::Optimal || res.status != SolveStatus::Infeasible {
                log::debug!("relaxed re-solve at x = {:?}: {:?} -> {:?}", x0.as_slice(), res.status, retry.status);
                res = retry;
            }
        }
        match res.status {
            SolveStatus::Optimal => {
                let nu = self.system().m();
                let inputs: Vec<DVector<f64>> =
                    (0..self.setup.hold.holds()).map(|j| res.x.rows(j * nu, nu).into_owned()).collect();
                let nominal = (0..=self.horizon()).map(|k| &self.phi[k] * x0 + &self.gamma[k] * &res.x).collect();
                Ok(MpcSolution {
                    status: MpcStatus::Feasible,
                    inputs,
                    nominal,
                    objective: res.objective + qp.constant,
                    iterations: res.iterations,
                })
            }
            SolveStatus::Infeasible => Ok(MpcSolution {
                status: MpcStatus::Infeasible,
                inputs: Vec::new(),
                nominal: Vec::new(),
                objective: f64::INFINITY,
                iterations: res.iterations,
            }),
            other => Err(MpcError::SolverFailure(format!(
                "{other:?} after {} iterations at x = {:?}",
                res.iterations,
                x0.as_slice()
            ))),
        }
    }
}

/// Rows `H (free + Γ U) ≤ h` for every set active at one step; rows with
/// the same normal keep the smallest offset.
fn push_state_rows(
    rows: &mut Vec<(Vec<f64>, f64)>,
    scales: &mut Vec<f64>,
    sets_k: &[&Polytope],
    gamma: &DMatrix<f64>,
    free: &DVector<f64>,
) {
    let mut seen: Vec<(Vec<f64>, usize)> = Vec::new();
    for set in sets_k {
        for i in 0..set.nrows() {
            let h = set.a().row(i);
            let norm = h.norm();
            if norm == 0.0 {
                if set.b()[i] < 0.0 {
                    rows.push((vec![0.0; gamma.ncols()], set.b()[i]));
                    scales.push(set.b()[i].abs());
                }
                continue;
            }
            let unit: Vec<f64> = h.iter().map(|v| v / norm).collect();
            let c: Vec<f64> = (h * gamma).iter().map(|v| v / norm).collect();
            let along = (h * free)[0];
            let rhs = (set.b()[i] - along) / norm;
            let scale = (set.b()[i].abs() + along.abs()) / norm;
            if let Some((_, idx)) = seen.iter().find(|(u, _)| u.iter().zip(&unit).all(|(a, b)| (a - b).abs() <= 1e-12)) {
                if rhs < rows[*idx].1 {
                    rows[*idx].1 = rhs;
                }
                scales[*idx] = scales[*idx].max(scale);
                continue;
            }
            seen.push((unit, rows.len()));
            rows.push((c, rhs));
            scales.push(scale);
        }
    }
}
