//! Dense LP / convex QP solvers.
//!
//! Both problem classes go through one homogeneous self-dual primal-dual
//! interior-point method ([`ipm`]). Problems here are tiny (a handful of
//! variables, at most a few hundred rows) so everything is dense.

mod active_set;
mod ipm;
mod polish;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use ipm::kkt_residuals;

/// Default residual tolerance for LP/QP solves.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite problem data")]
    NonFinite,
    #[error("Hessian is not convex (min eigenvalue {min_eig:.3e}, asymmetry {asym:.3e})")]
    NonConvex { min_eig: f64, asym: f64 },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// `min cᵀx  s.t.  G x ≤ g,  F x = f`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub cost: DVector<f64>,
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
}

impl LinearProgram {
    pub fn new(cost: DVector<f64>, a_ineq: DMatrix<f64>, b_ineq: DVector<f64>) -> Self {
        let d = cost.len();
        LinearProgram {
            cost,
            a_ineq,
            b_ineq,
            a_eq: DMatrix::zeros(0, d),
            b_eq: DVector::zeros(0),
        }
    }

    pub fn with_equalities(mut self, a_eq: DMatrix<f64>, b_eq: DVector<f64>) -> Self {
        self.a_eq = a_eq;
        self.b_eq = b_eq;
        self
    }

    pub fn dim(&self) -> usize {
        self.cost.len()
    }

    fn validate(&self) -> Result<(), OptimError> {
        check_system(self.dim(), &self.a_ineq, &self.b_ineq, &self.a_eq, &self.b_eq)?;
        if !all_finite(self.cost.iter()) {
            return Err(OptimError::NonFinite);
        }
        Ok(())
    }
}

/// `min ½xᵀPx + qᵀx  s.t.  G x ≤ g,  F x = f` with `P` symmetric PSD.
#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    pub hessian: DMatrix<f64>,
    pub cost: DVector<f64>,
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
}

impl QuadraticProgram {
    pub fn new(
        hessian: DMatrix<f64>,
        cost: DVector<f64>,
        a_ineq: DMatrix<f64>,
        b_ineq: DVector<f64>,
    ) -> Self {
        let d = cost.len();
        QuadraticProgram {
            hessian,
            cost,
            a_ineq,
            b_ineq,
            a_eq: DMatrix::zeros(0, d),
            b_eq: DVector::zeros(0),
        }
    }

    pub fn with_equalities(mut self, a_eq: DMatrix<f64>, b_eq: DVector<f64>) -> Self {
        self.a_eq = a_eq;
        self.b_eq = b_eq;
        self
    }

    pub fn dim(&self) -> usize {
        self.cost.len()
    }

    fn validate(&self) -> Result<(), OptimError> {
        let d = self.dim();
        check_system(d, &self.a_ineq, &self.b_ineq, &self.a_eq, &self.b_eq)?;
        if self.hessian.nrows() != d || self.hessian.ncols() != d {
            return Err(OptimError::DimensionMismatch(format!(
                "Hessian is {}x{}, expected {d}x{d}",
                self.hessian.nrows(),
                self.hessian.ncols()
            )));
        }
        if !all_finite(self.cost.iter().chain(self.hessian.iter())) {
            return Err(OptimError::NonFinite);
        }
        let scale = self.hessian.amax().max(1.0);
        let asym = (&self.hessian - self.hessian.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(OptimError::NonConvex { min_eig: f64::NAN, asym });
        }
        if d > 0 {
            let sym = (&self.hessian + self.hessian.transpose()) * 0.5;
            let min_eig = sym.symmetric_eigenvalues().min();
            if min_eig < -1e-9 * scale {
                return Err(OptimError::NonConvex { min_eig, asym });
            }
        }
        Ok(())
    }
}

fn all_finite<'a>(mut it: impl Iterator<Item = &'a f64>) -> bool {
    it.all(|v| v.is_finite())
}

fn check_system(
    d: usize,
    a_ineq: &DMatrix<f64>,
    b_ineq: &DVector<f64>,
    a_eq: &DMatrix<f64>,
    b_eq: &DVector<f64>,
) -> Result<(), OptimError> {
    if a_ineq.ncols() != d || a_ineq.nrows() != b_ineq.len() {
        return Err(OptimError::DimensionMismatch(format!(
            "inequality system is {}x{} with rhs {}, expected {d} columns",
            a_ineq.nrows(),
            a_ineq.ncols(),
            b_ineq.len()
        )));
    }
    if a_eq.ncols() != d || a_eq.nrows() != b_eq.len() {
        return Err(OptimError::DimensionMismatch(format!(
            "equality system is {}x{} with rhs {}, expected {d} columns",
            a_eq.nrows(),
            a_eq.ncols(),
            b_eq.len()
        )));
    }
    if !all_finite(a_ineq.iter().chain(b_ineq.iter()).chain(a_eq.iter()).chain(b_eq.iter())) {
        return Err(OptimError::NonFinite);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Relative residuals of a primal/dual pair.
///
/// * `primal`: `max((Gx − g)₊, |Fx − f|) / (1 + ‖(g, f)‖∞)`
/// * `dual`: `‖Px + q + Gᵀz + Fᵀy‖∞ / (1 + max(‖q‖∞, ‖Px‖∞, ‖Gᵀz + Fᵀy‖∞))`
/// * `gap`: `|p* − d*| / (1 + min(|p*|, |d*|))`
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

/// Certificate attached to non-optimal terminations.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// `y ≥ 0, λ` with `Gᵀy + Fᵀλ ≈ 0` and `gᵀy + fᵀλ = −1`.
    PrimalInfeasible { y_ineq: DVector<f64>, y_eq: DVector<f64> },
    /// Direction `r` with `Pr ≈ 0`, `Gr ≤ 0`, `Fr ≈ 0` and `qᵀr = −1`.
    DualInfeasible { ray: DVector<f64> },
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: DVector<f64>,
    /// Multipliers of the inequality rows (nonnegative).
    pub z_ineq: DVector<f64>,
    /// Multipliers of the equality rows.
    pub y_eq: DVector<f64>,
    pub objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub certificate: Option<Certificate>,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Solver knobs. `max_iter = None` means `max(10·d·rows, 50)`. With
/// `polish`, QP optima are refined on their active set when that gives an
/// exactly feasible point.
#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: Option<usize>,
    pub polish: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tol: DEFAULT_TOL, max_iter: None, polish: true }
    }
}

impl SolverSettings {
    pub fn with_tol(tol: f64) -> Self {
        SolverSettings { tol, max_iter: None, polish: true }
    }
}

pub fn solve_lp(lp: &LinearProgram, tol: f64) -> Result<SolveResult, OptimError> {
    solve_lp_with(lp, &SolverSettings::with_tol(tol))
}

pub fn solve_lp_with(lp: &LinearProgram, settings: &SolverSettings) -> Result<SolveResult, OptimError> {
    if !(settings.tol > 0.0) {
        return Err(OptimError::BadTolerance(settings.tol));
    }
    lp.validate()?;
    let d = lp.dim();
    let p = DMatrix::zeros(d, d);
    Ok(ipm::solve(&p, &lp.cost, &lp.a_ineq, &lp.b_ineq, &lp.a_eq, &lp.b_eq, settings, true))
}

pub fn solve_qp(qp: &QuadraticProgram, tol: f64) -> Result<SolveResult, OptimError> {
    solve_qp_with(qp, &SolverSettings::with_tol(tol))
}

pub fn solve_qp_with(
    qp: &QuadraticProgram,
    settings: &SolverSettings,
) -> Result<SolveResult, OptimError> {
    if !(settings.tol > 0.0) {
        return Err(OptimError::BadTolerance(settings.tol));
    }
    qp.validate()?;
    let sym = (&qp.hessian + qp.hessian.transpose()) * 0.5;
    let res = ipm::solve(&sym, &qp.cost, &qp.a_ineq, &qp.b_ineq, &qp.a_eq, &qp.b_eq, settings, false);
    if settings.polish && res.is_optimal() {
        if let Some(better) = polish::refine(&sym, &qp.cost, &qp.a_ineq, &qp.b_ineq, &qp.a_eq, &qp.b_eq, &res, settings.tol) {
            return Ok(better);
        }
    }
    if res.status == SolveStatus::IterationLimit {
        // Stalls come from feasible sets without interior; a dual active-set
        // method copes with those when the Hessian is definite.
        if let Some(r) = active_set::solve(&sym, &qp.cost, &qp.a_ineq, &qp.b_ineq, &qp.a_eq, &qp.b_eq, settings.tol) {
            log::debug!("interior-point stall resolved by active set: {:?}", r.status);
            return Ok(r);
        }
    }
    Ok(res)
}
