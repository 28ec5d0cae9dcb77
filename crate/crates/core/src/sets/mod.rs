//! Robust M-step-hold reachability: precursor sets, controllable sets,
//! maximal invariant sets and the disturbance reach sets `E_k`.

mod archive;

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::polytope::{BoxSet, Polytope, PolytopeError, Support};
use crate::tol::Tolerances;

pub use archive::{read_archive, write_archive, ArchiveManifest};

#[derive(Debug, Error, Clone)]
pub enum SetsError {
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite system matrix")]
    NonFinite,
    #[error("schedule has {got} sets, hold length is {expected}")]
    ScheduleLength { expected: usize, got: usize },
    #[error("disturbance set {0} is empty")]
    EmptyDisturbance(usize),
    #[error("disturbance set {0} is unbounded")]
    UnboundedDisturbance(usize),
    #[error("invalid hold configuration: {0}")]
    InvalidHold(String),
    #[error("fixed point not reached after {iters} iterations")]
    NoConvergence { iters: usize, last: Box<Polytope> },
    #[error("archive: {0}")]
    Archive(String),
}

pub type Result<T> = std::result::Result<T, SetsError>;

/// `x⁺ = A x + B u + E w`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    e: DMatrix<f64>,
    ts: f64,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, e: DMatrix<f64>, ts: f64) -> Result<LtiSystem> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || e.nrows() != n {
            return Err(SetsError::DimensionMismatch(format!(
                "A {}x{}, B {}x{}, E {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                e.nrows(),
                e.ncols()
            )));
        }
        if a.iter().chain(b.iter()).chain(e.iter()).any(|v| !v.is_finite()) || !ts.is_finite() {
            return Err(SetsError::NonFinite);
        }
        Ok(LtiSystem { a, b, e, ts })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }
    pub fn ts(&self) -> f64 {
        self.ts
    }
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn o(&self) -> usize {
        self.e.ncols()
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + &self.e * w
    }

    /// Hex SHA-256 over the matrices and sampling time.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for m in [&self.a, &self.b, &self.e] {
            h.update((m.nrows() as u64).to_le_bytes());
            h.update((m.ncols() as u64).to_le_bytes());
            for v in m.iter() {
                h.update(v.to_le_bytes());
            }
        }
        h.update(self.ts.to_le_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `[A⁰, A¹, …, A^k]`.
    fn powers(&self, k: usize) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(k + 1);
        out.push(DMatrix::identity(self.n(), self.n()));
        for i in 0..k {
            out.push(&self.a * &out[i]);
        }
        out
    }
}

#[derive(Debug, Clone)]
enum WSet {
    Box(BoxSet),
    Poly(Polytope),
}

/// Disturbance sets `W_0 … W_{M−1}`; step `t` uses `W_{t mod M}`.
#[derive(Debug, Clone)]
pub struct DisturbanceSchedule {
    sets: Vec<WSet>,
}

impl DisturbanceSchedule {
    pub fn from_boxes(boxes: Vec<BoxSet>) -> Result<DisturbanceSchedule> {
        if boxes.is_empty() {
            return Err(SetsError::InvalidHold("empty schedule".into()));
        }
        let o = boxes[0].dim();
        if boxes.iter().any(|b| b.dim() != o) {
            return Err(SetsError::DimensionMismatch("schedule sets differ in dimension".into()));
        }
        Ok(DisturbanceSchedule { sets: boxes.into_iter().map(WSet::Box).collect() })
    }

    pub fn from_polytopes(sets: Vec<Polytope>) -> Result<DisturbanceSchedule> {
        if sets.is_empty() {
            return Err(SetsError::InvalidHold("empty schedule".into()));
        }
        let o = sets[0].dim();
        for (i, s) in sets.iter().enumerate() {
            if s.dim() != o {
                return Err(SetsError::DimensionMismatch("schedule sets differ in dimension".into()));
            }
            if s.is_empty() {
                return Err(SetsError::EmptyDisturbance(i));
            }
            if !s.is_bounded()? {
                return Err(SetsError::UnboundedDisturbance(i));
            }
        }
        Ok(DisturbanceSchedule { sets: sets.into_iter().map(WSet::Poly).collect() })
    }

    /// The same box at every step of an `m`-step hold.
    pub fn uniform(w: BoxSet, m: usize) -> Result<DisturbanceSchedule> {
        DisturbanceSchedule::from_boxes(vec![w; m.max(1)])
    }

    /// The singleton `{w}` at every step: a deterministic disturbance.
    pub fn singleton(w: &[f64], m: usize) -> Result<DisturbanceSchedule> {
        let v = DVector::from_column_slice(w);
        DisturbanceSchedule::uniform(BoxSet::new(v.clone(), v)?, m)
    }

    pub fn zero(o: usize, m: usize) -> Result<DisturbanceSchedule> {
        DisturbanceSchedule::singleton(&vec![0.0; o], m)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn dim(&self) -> usize {
        match &self.sets[0] {
            WSet::Box(b) => b.dim(),
            WSet::Poly(p) => p.dim(),
        }
    }

    pub fn set(&self, t: usize) -> Polytope {
        match &self.sets[t % self.sets.len()] {
            WSet::Box(b) => b.to_polytope(),
            WSet::Poly(p) => p.clone(),
        }
    }

    pub fn boxes(&self) -> Option<Vec<BoxSet>> {
        self.sets
            .iter()
            .map(|s| match s {
                WSet::Box(b) => Some(b.clone()),
                WSet::Poly(_) => None,
            })
            .collect()
    }

    /// Support function of `W_{t mod M}`; closed form for boxes.
    pub fn support(&self, t: usize, dir: &[f64]) -> Result<f64> {
        match &self.sets[t % self.sets.len()] {
            WSet::Box(b) => Ok(b.support(dir)),
            WSet::Poly(p) => match p.support(dir)? {
                Support::Finite(v) => Ok(v),
                Support::Unbounded => Err(SetsError::UnboundedDisturbance(t % self.sets.len())),
                Support::Empty => Err(SetsError::EmptyDisturbance(t % self.sets.len())),
            },
        }
    }

    /// Whether every set contains the origin.
    pub fn contains_origin(&self) -> bool {
        self.sets.iter().all(|s| match s {
            WSet::Box(b) => b.contains_point(&vec![0.0; b.dim()]),
            WSet::Poly(p) => p.contains_point(&vec![0.0; p.dim()], 1e-12),
        })
    }

    /// Short text form used in archive manifests.
    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .sets
            .iter()
            .map(|s| match s {
                WSet::Box(b) => {
                    let iv: Vec<String> =
                        (0..b.dim()).map(|i| format!("[{},{}]", b.lower[i], b.upper[i])).collect();
                    iv.join("x")
                }
                WSet::Poly(p) => format!("poly({} rows)", p.nrows()),
            })
            .collect();
        if parts.iter().all(|p| *p == parts[0]) {
            format!("{}^{}", parts[0], parts.len())
        } else {
            parts.join(";")
        }
    }
}

/// Hold length `M` and horizon `N` with `N mod M = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HoldConfig {
    m: usize,
    n: usize,
}

impl HoldConfig {
    pub fn new(m: usize, n: usize) -> Result<HoldConfig> {
        if m == 0 || n == 0 {
            return Err(SetsError::InvalidHold(format!("M = {m} and N = {n} must be positive")));
        }
        if !n.is_multiple_of(m) {
            return Err(SetsError::InvalidHold(format!("horizon {n} is not a multiple of hold {m}")));
        }
        Ok(HoldConfig { m, n })
    }
    pub fn hold(&self) -> usize {
        self.m
    }
    pub fn horizon(&self) -> usize {
        self.n
    }
    pub fn holds(&self) -> usize {
        self.n / self.m
    }
}

/// Static feedback `u = −K x` applied at hold starts.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackGain {
    pub k: DMatrix<f64>,
}

impl FeedbackGain {
    pub fn new(k: DMatrix<f64>) -> Result<FeedbackGain> {
        if k.iter().any(|v| !v.is_finite()) {
            return Err(SetsError::NonFinite);
        }
        Ok(FeedbackGain { k })
    }
    pub fn zero(m: usize, n: usize) -> FeedbackGain {
        FeedbackGain { k: DMatrix::zeros(m, n) }
    }
}

/// Options of the fixed-point iterations.
#[derive(Debug, Clone, Copy)]
pub struct FixedPointOptions {
    pub max_iters: usize,
    pub tol: Tolerances,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions { max_iters: 500, tol: Tolerances::DEFAULT }
    }
}

fn check_dims(sys: &LtiSystem, x: &Polytope, u: &Polytope, s: &Polytope) -> Result<()> {
    if x.dim() != sys.n() || s.dim() != sys.n() {
        return Err(SetsError::DimensionMismatch(format!(
            "state sets have dimensions {} and {}, system has {}",
            x.dim(),
            s.dim(),
            sys.n()
        )));
    }
    if u.dim() != sys.m() {
        return Err(SetsError::DimensionMismatch(format!("input set has dimension {}, system has {}", u.dim(), sys.m())));
    }
    Ok(())
}

fn check_schedule(sys: &LtiSystem, sched: &DisturbanceSchedule, m: usize) -> Result<()> {
    if m == 0 {
        return Err(SetsError::InvalidHold("M must be positive".into()));
    }
    if sched.len() != m {
        return Err(SetsError::ScheduleLength { expected: m, got: sched.len() });
    }
    if sched.dim() != sys.o() {
        return Err(SetsError::DimensionMismatch(format!(
            "disturbance sets have dimension {}, system has {}",
            sched.dim(),
            sys.o()
        )));
    }
    Ok(())
}

/// `E_1 … E_M` with `E_k = A E_{k−1} ⊕ E W_{k−1}`.
pub fn error_sets(sys: &LtiSystem, sched: &DisturbanceSchedule, m: usize) -> Result<Vec<Polytope>> {
    check_schedule(sys, sched, m)?;
    let mut out: Vec<Polytope> = Vec::with_capacity(m);
    for k in 0..m {
        let term = sched.set(k).affine_map(sys.e())?;
        let next = match out.last() {
            None => term,
            Some(prev) => prev.affine_map(sys.a())?.minkowski_sum(&term)?,
        };
        out.push(next);
    }
    Ok(out)
}

/// `E_k = ⊕_{j<k} A^{k−1−j} E W_j` for `1 ≤ k ≤ M`.
pub fn error_set(sys: &LtiSystem, sched: &DisturbanceSchedule, k: usize) -> Result<Polytope> {
    let m = sched.len();
    if k == 0 || k > m {
        return Err(SetsError::InvalidHold(format!("error set index {k} outside 1..={m}")));
    }
    Ok(error_sets(sys, sched, m)?.swap_remove(k - 1))
}

/// Rows of the stacked hold system: `(coefficients on x, on u, rhs)`.
struct HoldRows {
    x: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

/// Constraint rows for `x_1..x_{M−1} ∈ X`, `x_M ∈ S` under a held input,
/// with right-hand sides tightened by the worst-case disturbance.
fn hold_rows(
    sys: &LtiSystem,
    x: &Polytope,
    s: &Polytope,
    sched: &DisturbanceSchedule,
    m: usize,
) -> Result<HoldRows> {
    let (n, nu) = (sys.n(), sys.m());
    let pw = sys.powers(m);
    // Σ_{j<t} A^j B
    let mut bsum = vec![DMatrix::zeros(n, nu)];
    for t in 0..m {
        let next = &bsum[t] + &pw[t] * sys.b();
        bsum.push(next);
    }
    let ae: Vec<DMatrix<f64>> = (0..m).map(|k| &pw[k] * sys.e()).collect();

    let mut rows = HoldRows { x: Vec::new(), u: Vec::new(), rhs: Vec::new() };
    for t in 1..=m {
        let target = if t == m { s } else { x };
        for i in 0..target.nrows() {
            let hrow = target.a().row(i);
            if hrow.iter().all(|v| *v == 0.0) && target.b()[i] >= 0.0 {
                continue;
            }
            let cx = hrow * &pw[t];
            let cu = hrow * &bsum[t];
            let mut rhs = target.b()[i];
            for k in 0..t {
                let dir = hrow * &ae[t - 1 - k];
                if dir.iter().any(|v| *v != 0.0) {
                    rhs -= sched.support(k, dir.as_slice())?;
                }
            }
            rows.x.push(cx.iter().copied().collect());
            rows.u.push(cu.iter().copied().collect());
            rows.rhs.push(rhs);
        }
    }
    Ok(rows)
}

/// Robust M-step-hold precursor of `s`: states from which one held input
/// in `u` keeps `x_1..x_{M−1}` in `x` and puts `x_M` in `s` for every
/// disturbance sequence of the schedule.
pub fn pre_m(
    sys: &LtiSystem,
    x: &Polytope,
    u: &Polytope,
    s: &Polytope,
    sched: &DisturbanceSchedule,
    m: usize,
) -> Result<Polytope> {
    check_dims(sys, x, u, s)?;
    check_schedule(sys, sched, m)?;
    let n = sys.n();
    if s.is_empty() || u.is_empty() {
        return Ok(Polytope::empty(n));
    }
    let rows = hold_rows(sys, x, s, sched, m)?;
    let nu = sys.m();
    let total = rows.rhs.len() + u.nrows();
    let mut h = DMatrix::zeros(total, n + nu);
    let mut k = DVector::zeros(total);
    for r in 0..rows.rhs.len() {
        for j in 0..n {
            h[(r, j)] = rows.x[r][j];
        }
        for j in 0..nu {
            h[(r, n + j)] = rows.u[r][j];
        }
        k[r] = rows.rhs[r];
    }
    let off = rows.rhs.len();
    for r in 0..u.nrows() {
        for j in 0..nu {
            h[(off + r, n + j)] = u.a()[(r, j)];
        }
        k[off + r] = u.b()[r];
    }
    let lifted = Polytope::new(h, k)?;
    let keep: Vec<usize> = (0..n).collect();
    Ok(lifted.project(&keep)?)
}

/// Precursor under the fixed hold policy `u = −K x_0`; no projection.
pub fn pre_pi_m(
    sys: &LtiSystem,
    x: &Polytope,
    u: &Polytope,
    s: &Polytope,
    sched: &DisturbanceSchedule,
    m: usize,
    gain: &FeedbackGain,
) -> Result<Polytope> {
    check_dims(sys, x, u, s)?;
    check_schedule(sys, sched, m)?;
    let (n, nu) = (sys.n(), sys.m());
    if gain.k.nrows() != nu || gain.k.ncols() != n {
        return Err(SetsError::DimensionMismatch(format!(
            "gain is {}x{}, expected {nu}x{n}",
            gain.k.nrows(),
            gain.k.ncols()
        )));
    }
    if s.is_empty() {
        return Ok(Polytope::empty(n));
    }
    let rows = hold_rows(sys, x, s, sched, m)?;
    let total = rows.rhs.len() + u.nrows();
    let mut h = DMatrix::zeros(total, n);
    let mut k = DVector::zeros(total);
    for r in 0..rows.rhs.len() {
        let cx = DVector::from_column_slice(&rows.x[r]);
        let cu = DVector::from_column_slice(&rows.u[r]);
        let closed = cx - gain.k.transpose() * cu;
        h.row_mut(r).copy_from(&closed.transpose());
        k[r] = rows.rhs[r];
    }
    let off = rows.rhs.len();
    for r in 0..u.nrows() {
        let row = -(u.a().row(r) * &gain.k);
        h.row_mut(off + r).copy_from(&row);
        k[off + r] = u.b()[r];
    }
    Ok(Polytope::new(h, k)?.minimize()?)
}

/// `[K_0, K_M, …, K_steps]` with `K_0 = target`, `K_{i+M} = Pre^M(K_i) ∩ X`.
pub fn controllable_set(
    sys: &LtiSystem,
    x: &Polytope,
    u: &Polytope,
    target: &Polytope,
    sched: &DisturbanceSchedule,
    m: usize,
    steps: usize,
) -> Result<Vec<Polytope>> {
    check_schedule(sys, sched, m)?;
    if !steps.is_multiple_of(m) {
        return Err(SetsError::InvalidHold(format!("{steps} steps is not a multiple of hold {m}")));
    }
    let mut out = vec![target.minimize()?];
    for _ in 0..steps / m {
        let prev = out.last().expect("nonempty");
        let next = if prev.is_empty() {
            Polytope::empty(sys.n())
        } else {
            pre_m(sys, x, u, prev, sched, m)?.intersect(x)?
        };
        out.push(next);
    }
    Ok(out)
}

/// `Ω_{k+1} = step(Ω_k) ∩ Ω_k` until two iterates agree.
fn fixed_point(
    init: &Polytope,
    opts: &FixedPointOptions,
    step: impl Fn(&Polytope) -> Result<Polytope>,
) -> Result<(Polytope, usize)> {
    let n = init.dim();
    let mut omega = init.minimize()?;
    for it in 1..=opts.max_iters.max(1) {
        if omega.is_empty() {
            return Ok((Polytope::empty(n), it - 1));
        }
        let next = step(&omega)?.intersect(&omega)?;
        if collapsed(&next, opts.tol.collapse)? {
            return Ok((Polytope::empty(n), it));
        }
        if next.set_equal(&omega, opts.tol.set)? {
            return Ok((next, it));
        }
        log::debug!("fixed point iteration {it}: {} rows", next.nrows());
        omega = next;
    }
    Err(SetsError::NoConvergence { iters: opts.max_iters, last: Box::new(omega) })
}

/// Empty, or narrower than `width` along every axis.
fn collapsed(p: &Polytope, width: f64) -> Result<bool> {
    match p.bounding_box()? {
        None => Ok(true),
        Some((lo, hi)) => Ok((0..lo.len()).all(|i| hi[i] - lo[i] <= width)),
    }
}

/// Result of a fixed-point computation with its iteration count.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub set: Polytope,
    pub iterations: usize,
}

/// Maximal robust M-step-hold control invariant subset of `x`.
pub fn max_control_invariant(
    sys: &LtiSystem,
    x: &Polytope,
    u: &Polytope,
    sched: &DisturbanceSchedule,
    m: usize,
    max_iters: usize,
) -> Result<Polytope> {
    let opts = FixedPointOptions { max_iters, ..Default::default() };
    Ok(max_control_invariant_from(sys, x, x, u, sched, m, &opts)?.set)
}

/// Fixed point of `Ω ↦ Pre^M(Ω) ∩ Ω` started from `init ⊆ x`.
pub fn max_control_invariant_from(
    sys: &LtiSystem,
    init: &Polytope,
    x: &Polytope,
    u: &Polytope,
    sched: &DisturbanceSchedule,
    m: usize,
    opts: &FixedPointOptions,
) -> Result<FixedPoint> {
    check_schedule(sys, sched, m)?;
    let (set, iterations) = fixed_point(init, opts, |s| pre_m(sys, x, u, s, sched, m))?;
    Ok(FixedPoint { set, iterations })
}

/// Maximal robust M-step-hold positive invariant subset of `x` under `gain`.
pub fn max_positive_invariant(
    sys: &LtiSystem,
    x: &Polytope,
    u: &Polytope,
    sched: &DisturbanceSchedule,
    m: usize,
    gain: &FeedbackGain,
    max_iters: usize,
) -> Result<Polytope> {
    check_schedule(sys, sched, m)?;
    let opts = FixedPointOptions { max_iters, ..Default::default() };
    Ok(fixed_point(x, &opts, |s| pre_pi_m(sys, x, u, s, sched, m, gain))?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64, e: f64) -> LtiSystem {
        LtiSystem::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, e),
            1.0,
        )
        .unwrap()
    }

    fn iv(lo: f64, hi: f64) -> Polytope {
        Polytope::from_box(&[lo], &[hi]).unwrap()
    }

    #[test]
    fn pre_of_empty_is_empty() {
        let sys = scalar(1.0, 1.0, 0.0);
        let w = DisturbanceSchedule::zero(1, 1).unwrap();
        let p = pre_m(&sys, &iv(-1.0, 1.0), &iv(-1.0, 1.0), &Polytope::empty(1), &w, 1).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn pre_interval_sum() {
        let sys = scalar(1.0, 1.0, 0.0);
        let w = DisturbanceSchedule::zero(1, 1).unwrap();
        let x = iv(-1.0, 1.0);
        let p = pre_m(&sys, &x, &x, &x, &w, 1).unwrap();
        assert!(p.set_equal(&iv(-2.0, 2.0), 1e-7).unwrap());
    }

    #[test]
    fn pre_tightens_by_disturbance() {
        // x⁺ = x + u + w, |w| ≤ 0.25: target [−1,1] shrinks to [−0.75,0.75]
        let sys = scalar(1.0, 1.0, 1.0);
        let w = DisturbanceSchedule::uniform(BoxSet::interval(-0.25, 0.25).unwrap(), 1).unwrap();
        let x = iv(-1.0, 1.0);
        let p = pre_m(&sys, &x, &iv(0.0, 0.0), &x, &w, 1).unwrap();
        assert!(p.set_equal(&iv(-0.75, 0.75), 1e-7).unwrap());
    }

    #[test]
    fn schedule_length_checked() {
        let sys = scalar(1.0, 1.0, 0.0);
        let w = DisturbanceSchedule::zero(1, 2).unwrap();
        let x = iv(-1.0, 1.0);
        assert!(matches!(pre_m(&sys, &x, &x, &x, &w, 1), Err(SetsError::ScheduleLength { .. })));
    }

    #[test]
    fn pre_pi_unconstrained_is_universe() {
        let sys = scalar(2.0, 1.0, 1.0);
        let w = DisturbanceSchedule::uniform(BoxSet::interval(-1.0, 1.0).unwrap(), 2).unwrap();
        let all = Polytope::universe(1);
        let g = FeedbackGain::new(DMatrix::from_element(1, 1, 0.5)).unwrap();
        let p = pre_pi_m(&sys, &all, &all, &all, &w, 2, &g).unwrap();
        assert_eq!(p.nrows(), 0);
    }

    #[test]
    fn contraction_is_invariant() {
        let sys = scalar(0.5, 1.0, 0.0);
        let w = DisturbanceSchedule::zero(1, 1).unwrap();
        let x = iv(-1.0, 1.0);
        let c = max_control_invariant(&sys, &x, &x, &w, 1, 500).unwrap();
        assert!(c.set_equal(&x, 1e-7).unwrap());
        let c0 = max_control_invariant(&sys, &x, &iv(0.0, 0.0), &w, 1, 500).unwrap();
        assert!(c0.set_equal(&x, 1e-7).unwrap());
        let o = max_positive_invariant(&sys, &x, &x, &w, 1, &FeedbackGain::zero(1, 1), 500).unwrap();
        assert!(o.set_equal(&x, 1e-7).unwrap());
    }

    #[test]
    fn expansion_collapses_to_empty() {
        let sys = scalar(2.0, 1.0, 0.0);
        let w = DisturbanceSchedule::zero(1, 1).unwrap();
        let x = iv(-1.0, 1.0);
        let o = max_positive_invariant(&sys, &x, &x, &w, 1, &FeedbackGain::zero(1, 1), 500).unwrap();
        assert!(o.is_empty());
    }

    #[test]
    fn no_convergence_carries_iterate() {
        let sys = scalar(2.0, 1.0, 0.0);
        let w = DisturbanceSchedule::zero(1, 1).unwrap();
        let x = iv(-1.0, 1.0);
        match max_positive_invariant(&sys, &x, &x, &w, 1, &FeedbackGain::zero(1, 1), 2) {
            Err(SetsError::NoConvergence { iters, last }) => {
                assert_eq!(iters, 2);
                assert!(last.set_equal(&iv(-0.25, 0.25), 1e-7).unwrap());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_schedule_error_sets_are_origin() {
        let sys = scalar(0.9, 1.0, 1.0);
        let w = DisturbanceSchedule::zero(1, 3).unwrap();
        for e in error_sets(&sys, &w, 3).unwrap() {
            assert!(e.set_equal(&Polytope::singleton(&[0.0]), 1e-9).unwrap());
        }
    }

    #[test]
    fn controllable_base_case() {
        let sys = scalar(1.0, 1.0, 0.0);
        let w = DisturbanceSchedule::zero(1, 1).unwrap();
        let x = iv(-1.0, 1.0);
        let ks = controllable_set(&sys, &x, &x, &iv(-0.5, 0.5), &w, 1, 0).unwrap();
        assert_eq!(ks.len(), 1);
        assert!(controllable_set(&sys, &x, &x, &x, &DisturbanceSchedule::zero(1, 2).unwrap(), 2, 3).is_err());
    }

    #[test]
    fn hold_config_requires_multiple() {
        assert!(HoldConfig::new(5, 10).is_ok());
        assert!(HoldConfig::new(3, 10).is_err());
        assert!(HoldConfig::new(0, 10).is_err());
    }
}
