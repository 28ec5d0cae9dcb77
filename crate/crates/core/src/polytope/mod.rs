//! H-representation polytopes `{x : Hx ≤ h}` and the set algebra on them.
//!
//! H-rep is primary. Vertex lists are computed on demand (dimension ≤ 3) for
//! Minkowski sums, affine images and plotting; polytopes built from points
//! keep their extreme points as exact generators.

mod fm;
mod hull;
mod io;
mod lp;
mod redundancy;
mod vertex;

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::optim::OptimError;
use crate::tol::Tolerances;
use lp::LpMax;

pub use io::{parse_hpoly, read_hpoly, write_hpoly};

/// Largest dimension supported by vertex-based operations.
pub const MAX_VERTEX_DIM: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolytopeError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("non-finite entries in polytope data")]
    NonFinite,
    #[error("Pontryagin difference with an empty subtrahend")]
    EmptySubtrahend,
    #[error("Pontryagin difference with an unbounded subtrahend")]
    UnboundedSubtrahend,
    #[error("operation requires a bounded polytope")]
    Unbounded,
    #[error("vertex operations are supported up to dimension {MAX_VERTEX_DIM}, got {0}")]
    Unsupported(usize),
    #[error("invalid coordinate selection: {0}")]
    BadDims(String),
    #[error("LP solver: {0}")]
    Solver(#[from] OptimError),
    #[error("LP solver did not converge ({0})")]
    SolverFailure(&'static str),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, PolytopeError>;

/// Axis-aligned box `lower ≤ x ≤ upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl BoxSet {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<BoxSet> {
        if lower.len() != upper.len() {
            return Err(PolytopeError::DimensionMismatch(lower.len(), upper.len()));
        }
        if lower.iter().chain(upper.iter()).any(|v| !v.is_finite()) {
            return Err(PolytopeError::NonFinite);
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(PolytopeError::BadDims("box lower bound exceeds upper bound".into()));
        }
        Ok(BoxSet { lower, upper })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<BoxSet> {
        BoxSet::new(DVector::from_element(1, lo), DVector::from_element(1, hi))
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Closed-form support function `max_{x ∈ box} dᵀx`.
    pub fn support(&self, dir: &[f64]) -> f64 {
        dir.iter()
            .enumerate()
            .map(|(i, d)| if *d >= 0.0 { d * self.upper[i] } else { d * self.lower[i] })
            .sum()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(i, v)| *v >= self.lower[i] && *v <= self.upper[i])
    }

    pub fn to_polytope(&self) -> Polytope {
        let n = self.dim();
        let mut h = DMatrix::zeros(2 * n, n);
        let mut k = DVector::zeros(2 * n);
        for i in 0..n {
            h[(i, i)] = 1.0;
            k[i] = self.upper[i];
            h[(n + i, i)] = -1.0;
            k[n + i] = -self.lower[i];
        }
        let corners = box_corners(&self.lower, &self.upper);
        Polytope::from_parts(h, k, Some(corners))
    }
}

fn box_corners(lo: &DVector<f64>, hi: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = lo.len();
    let mut out: Vec<DVector<f64>> = vec![DVector::zeros(n)];
    for i in 0..n {
        let mut next = Vec::with_capacity(out.len() * 2);
        for p in &out {
            let mut a = p.clone();
            a[i] = lo[i];
            next.push(a);
            if hi[i] != lo[i] {
                let mut b = p.clone();
                b[i] = hi[i];
                next.push(b);
            }
        }
        out = next;
    }
    out
}

/// Result of a support-function query.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    Finite(f64),
    Unbounded,
    Empty,
}

#[derive(Debug, Clone)]
pub struct Polytope {
    h: DMatrix<f64>,
    k: DVector<f64>,
    /// Exact extreme points when the polytope was built from points.
    generators: Option<Arc<Vec<DVector<f64>>>>,
    empty: OnceLock<bool>,
}

impl PartialEq for Polytope {
    /// Structural equality of the H-representation (not set equality).
    fn eq(&self, other: &Self) -> bool {
        self.h == other.h && self.k == other.k
    }
}

impl Polytope {
    pub fn new(h: DMatrix<f64>, k: DVector<f64>) -> Result<Polytope> {
        if h.nrows() != k.len() {
            return Err(PolytopeError::DimensionMismatch(h.nrows(), k.len()));
        }
        if h.iter().chain(k.iter()).any(|v| !v.is_finite()) {
            return Err(PolytopeError::NonFinite);
        }
        Ok(Polytope::from_parts(h, k, None))
    }

    pub(crate) fn from_parts(
        h: DMatrix<f64>,
        k: DVector<f64>,
        generators: Option<Vec<DVector<f64>>>,
    ) -> Polytope {
        Polytope { h, k, generators: generators.map(Arc::new), empty: OnceLock::new() }
    }

    /// Builds from rows `(a, b)` meaning `a·x ≤ b`.
    pub fn from_rows(dim: usize, rows: &[(Vec<f64>, f64)]) -> Result<Polytope> {
        let mut h = DMatrix::zeros(rows.len(), dim);
        let mut k = DVector::zeros(rows.len());
        for (i, (a, b)) in rows.iter().enumerate() {
            if a.len() != dim {
                return Err(PolytopeError::DimensionMismatch(a.len(), dim));
            }
            for j in 0..dim {
                h[(i, j)] = a[j];
            }
            k[i] = *b;
        }
        Polytope::new(h, k)
    }

    pub fn from_box(lower: &[f64], upper: &[f64]) -> Result<Polytope> {
        Ok(BoxSet::new(DVector::from_column_slice(lower), DVector::from_column_slice(upper))?
            .to_polytope())
    }

    /// The whole space `ℝⁿ` (no rows).
    pub fn universe(dim: usize) -> Polytope {
        Polytope::from_parts(DMatrix::zeros(0, dim), DVector::zeros(0), None)
    }

    /// Canonical empty set `0ᵀx ≤ −1`.
    pub fn empty(dim: usize) -> Polytope {
        let p = Polytope::from_parts(DMatrix::zeros(1, dim), DVector::from_element(1, -1.0), Some(vec![]));
        let _ = p.empty.set(true);
        p
    }

    pub fn singleton(point: &[f64]) -> Polytope {
        Polytope::from_points(&[DVector::from_column_slice(point)], point.len())
            .expect("a single point always has a hull")
    }

    /// Convex hull of `points` (dimension ≤ 3).
    pub fn from_points(points: &[DVector<f64>], dim: usize) -> Result<Polytope> {
        hull::hull(points, dim)
    }

    pub fn dim(&self) -> usize {
        self.h.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.h.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.k
    }

    pub fn generators(&self) -> Option<&[DVector<f64>]> {
        self.generators.as_deref().map(|v| v.as_slice())
    }

    pub fn rows(&self) -> impl Iterator<Item = (Vec<f64>, f64)> + '_ {
        (0..self.nrows()).map(move |i| (self.h.row(i).iter().copied().collect(), self.k[i]))
    }

    pub fn is_canonical_empty(&self) -> bool {
        self.nrows() == 1 && self.h.row(0).iter().all(|v| *v == 0.0) && self.k[0] < 0.0
    }

    pub fn contains_point(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        (0..self.nrows()).all(|i| {
            let v: f64 = self.h.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
            v <= self.k[i] + tol
        })
    }

    /// Largest violation `max_i (H_i x − h_i)` over unit-normalised rows
    /// together with the row index; `None` for the universe.
    pub fn max_violation(&self, x: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.nrows() {
            let norm = self.h.row(i).norm();
            let v: f64 = self.h.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
            let excess = if norm > 0.0 { (v - self.k[i]) / norm } else { -self.k[i] };
            if best.is_none_or(|(_, e)| excess > e) {
                best = Some((i, excess));
            }
        }
        best
    }

    /// Unit-norm rows; zero rows dropped, or the canonical empty set when a
    /// zero row has a negative offset.
    pub fn normalize(&self) -> Polytope {
        let n = self.dim();
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(self.nrows());
        for i in 0..self.nrows() {
            let norm = self.h.row(i).norm();
            if norm <= 1e-14 {
                if self.k[i] < -1e-12 {
                    return Polytope::empty(n);
                }
                continue;
            }
            rows.push((self.h.row(i).iter().map(|v| v / norm).collect(), self.k[i] / norm));
        }
        let mut p = Polytope::from_rows(n, &rows).expect("rows are finite");
        p.generators = self.generators.clone();
        if let Some(e) = self.empty.get() {
            let _ = p.empty.set(*e);
        }
        p
    }

    fn lp_tol() -> f64 {
        Tolerances::DEFAULT.lp
    }

    /// `max_{x∈P} dᵀx`, exact over generators when available, LP otherwise.
    pub fn support(&self, dir: &[f64]) -> Result<Support> {
        if dir.len() != self.dim() {
            return Err(PolytopeError::DimensionMismatch(dir.len(), self.dim()));
        }
        if let Some(gens) = self.generators() {
            if gens.is_empty() {
                return Ok(Support::Empty);
            }
            let v = gens
                .iter()
                .map(|g| g.iter().zip(dir).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            return Ok(Support::Finite(v));
        }
        self.support_lp(dir).map(|(s, _)| s)
    }

    /// Support function through the LP solver, with the maximiser.
    pub fn support_lp(&self, dir: &[f64]) -> Result<(Support, Option<DVector<f64>>)> {
        match lp::maximize(dir, &self.h, &self.k, Self::lp_tol())? {
            LpMax::Finite { value, x } => Ok((Support::Finite(value), Some(x))),
            LpMax::Unbounded => Ok((Support::Unbounded, None)),
            LpMax::Infeasible => Ok((Support::Empty, None)),
        }
    }

    /// Chebyshev depth LP on unit rows, with the radius capped at `cap`.
    /// Returns (centre, radius, unbounded).
    fn depth(&self, cap: Option<f64>) -> Result<(DVector<f64>, f64, bool)> {
        let p = self.normalize();
        let n = self.dim();
        let m = p.nrows();
        let extra = usize::from(cap.is_some());
        let mut a = DMatrix::zeros(m + extra, n + 1);
        let mut b = DVector::zeros(m + extra);
        for i in 0..m {
            for j in 0..n {
                a[(i, j)] = p.h[(i, j)];
            }
            a[(i, n)] = 1.0;
            b[i] = p.k[i];
        }
        if let Some(c) = cap {
            a[(m, n)] = 1.0;
            b[m] = c;
        }
        let mut cost = vec![0.0; n + 1];
        cost[n] = 1.0;
        match lp::maximize(&cost, &a, &b, Self::lp_tol())? {
            LpMax::Finite { value, x } => Ok((x.rows(0, n).into_owned(), value, false)),
            LpMax::Unbounded => Ok((DVector::zeros(n), f64::INFINITY, true)),
            LpMax::Infeasible => Ok((DVector::zeros(n), f64::NEG_INFINITY, false)),
        }
    }

    /// Emptiness test, cached after the first query.
    pub fn is_empty(&self) -> bool {
        *self.empty.get_or_init(|| {
            if self.nrows() == 0 {
                return false;
            }
            if let Some(g) = self.generators() {
                return g.is_empty();
            }
            match self.depth(Some(1.0)) {
                Ok((_, r, _)) => r < -Tolerances::DEFAULT.empty,
                Err(_) => false,
            }
        })
    }

    /// Centre and radius of the largest inscribed ball; `None` when empty.
    /// The radius is `∞` for polytopes containing arbitrarily large balls.
    pub fn chebyshev_center(&self) -> Result<Option<(DVector<f64>, f64)>> {
        if self.is_empty() {
            return Ok(None);
        }
        let (c, r, unbounded) = self.depth(None)?;
        if unbounded {
            let (c, _, _) = self.depth(Some(1.0))?;
            return Ok(Some((c, f64::INFINITY)));
        }
        if r < -Tolerances::DEFAULT.empty {
            return Ok(None);
        }
        Ok(Some((c, r.max(0.0))))
    }

    /// A point inside the polytope with a strictly positive margin when one
    /// exists (`None` when empty).
    pub fn interior_point(&self) -> Result<Option<(DVector<f64>, f64)>> {
        if self.is_empty() {
            return Ok(None);
        }
        let (c, r, _) = self.depth(Some(1.0))?;
        Ok(Some((c, r)))
    }

    pub fn is_bounded(&self) -> Result<bool> {
        if self.generators.is_some() {
            return Ok(true);
        }
        if self.is_empty() {
            return Ok(true);
        }
        let n = self.dim();
        for j in 0..n {
            for sgn in [1.0, -1.0] {
                let mut d = vec![0.0; n];
                d[j] = sgn;
                if let Support::Unbounded = self.support(&d)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Coordinate-wise bounds; `None` when empty, infinite entries when unbounded.
    pub fn bounding_box(&self) -> Result<Option<(DVector<f64>, DVector<f64>)>> {
        if self.is_empty() {
            return Ok(None);
        }
        let n = self.dim();
        let mut lo = DVector::zeros(n);
        let mut hi = DVector::zeros(n);
        for j in 0..n {
            let mut d = vec![0.0; n];
            d[j] = 1.0;
            hi[j] = match self.support(&d)? {
                Support::Finite(v) => v,
                Support::Unbounded => f64::INFINITY,
                Support::Empty => return Ok(None),
            };
            d[j] = -1.0;
            lo[j] = match self.support(&d)? {
                Support::Finite(v) => -v,
                Support::Unbounded => f64::NEG_INFINITY,
                Support::Empty => return Ok(None),
            };
        }
        Ok(Some((lo, hi)))
    }

    fn check_dim(&self, other: &Polytope) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(PolytopeError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(())
    }

    /// Row concatenation without redundancy removal.
    pub fn stack(&self, other: &Polytope) -> Result<Polytope> {
        self.check_dim(other)?;
        let n = self.dim();
        let m = self.nrows() + other.nrows();
        let mut h = DMatrix::zeros(m, n);
        let mut k = DVector::zeros(m);
        h.rows_mut(0, self.nrows()).copy_from(&self.h);
        h.rows_mut(self.nrows(), other.nrows()).copy_from(&other.h);
        k.rows_mut(0, self.nrows()).copy_from(&self.k);
        k.rows_mut(self.nrows(), other.nrows()).copy_from(&other.k);
        Ok(Polytope::from_parts(h, k, None))
    }

    pub fn intersect(&self, other: &Polytope) -> Result<Polytope> {
        self.stack(other)?.minimize()
    }

    /// Removes every redundant row. The set is unchanged.
    pub fn minimize(&self) -> Result<Polytope> {
        redundancy::minimize(self, &Tolerances::DEFAULT)
    }

    pub fn minimize_with(&self, tol: &Tolerances) -> Result<Polytope> {
        redundancy::minimize(self, tol)
    }

    /// `self ⊖ other = {x : x + v ∈ self ∀ v ∈ other}`.
    pub fn pontryagin_diff(&self, other: &Polytope) -> Result<Polytope> {
        self.check_dim(other)?;
        if other.is_empty() {
            return Err(PolytopeError::EmptySubtrahend);
        }
        if self.is_empty() {
            return Ok(Polytope::empty(self.dim()));
        }
        let mut k = self.k.clone();
        for i in 0..self.nrows() {
            let dir: Vec<f64> = self.h.row(i).iter().copied().collect();
            if dir.iter().all(|v| *v == 0.0) {
                continue;
            }
            match other.support(&dir)? {
                Support::Finite(s) => k[i] -= s,
                Support::Unbounded => return Err(PolytopeError::UnboundedSubtrahend),
                Support::Empty => return Err(PolytopeError::EmptySubtrahend),
            }
        }
        Ok(Polytope::from_parts(self.h.clone(), k, None))
    }

    /// `self ⊕ other`, via vertex sums and a convex hull (bounded, dim ≤ 3).
    pub fn minkowski_sum(&self, other: &Polytope) -> Result<Polytope> {
        self.check_dim(other)?;
        if self.is_empty() || other.is_empty() {
            return Ok(Polytope::empty(self.dim()));
        }
        let va = self.vertices()?;
        let vb = other.vertices()?;
        let mut pts = Vec::with_capacity(va.len() * vb.len());
        for a in &va {
            for b in &vb {
                pts.push(a + b);
            }
        }
        Polytope::from_points(&pts, self.dim())
    }

    /// Extreme points (bounded, dim ≤ 3).
    pub fn vertices(&self) -> Result<Vec<DVector<f64>>> {
        if let Some(g) = self.generators() {
            return Ok(g.to_vec());
        }
        vertex::enumerate(self)
    }

    /// Image `{T x : x ∈ P}` for a `k × n` matrix `T`.
    pub fn affine_map(&self, t: &DMatrix<f64>) -> Result<Polytope> {
        if t.ncols() != self.dim() {
            return Err(PolytopeError::DimensionMismatch(t.ncols(), self.dim()));
        }
        if self.is_empty() {
            return Ok(Polytope::empty(t.nrows()));
        }
        if t.is_square() && self.generators.is_none() {
            if let Some(inv) = t.clone().try_inverse() {
                let cond = t.norm() * inv.norm();
                if cond.is_finite() && cond < 1e10 {
                    return Ok(Polytope::from_parts(&self.h * inv, self.k.clone(), None));
                }
            }
        }
        let pts: Vec<DVector<f64>> = self.vertices()?.iter().map(|v| t * v).collect();
        Polytope::from_points(&pts, t.nrows())
    }

    /// Preimage `{x : T x ∈ P}` for an `n × k` matrix `T` (exact in H-rep).
    pub fn affine_preimage(&self, t: &DMatrix<f64>) -> Result<Polytope> {
        if t.nrows() != self.dim() {
            return Err(PolytopeError::DimensionMismatch(t.nrows(), self.dim()));
        }
        Ok(Polytope::from_parts(&self.h * t, self.k.clone(), None))
    }

    pub fn translate(&self, v: &[f64]) -> Result<Polytope> {
        if v.len() != self.dim() {
            return Err(PolytopeError::DimensionMismatch(v.len(), self.dim()));
        }
        let shift = &self.h * DVector::from_column_slice(v);
        let gens = self
            .generators()
            .map(|g| g.iter().map(|p| p + DVector::from_column_slice(v)).collect());
        Ok(Polytope::from_parts(self.h.clone(), &self.k + shift, gens))
    }

    /// Scales the set about the origin by `factor > 0`.
    pub fn scale(&self, factor: f64) -> Polytope {
        let gens = self.generators().map(|g| g.iter().map(|p| p * factor).collect());
        Polytope::from_parts(self.h.clone(), &self.k * factor, gens)
    }

    /// Fixes coordinate `coord` to `value` and frees it: the result is the
    /// cylinder over the cross-section at `coord = value` (same dimension).
    pub fn cylinder_at(&self, coord: usize, value: f64) -> Result<Polytope> {
        if coord >= self.dim() {
            return Err(PolytopeError::BadDims(format!("coordinate {coord} out of range")));
        }
        let mut h = self.h.clone();
        let mut k = self.k.clone();
        for i in 0..self.nrows() {
            k[i] -= h[(i, coord)] * value;
            h[(i, coord)] = 0.0;
        }
        Ok(Polytope::from_parts(h, k, None).normalize())
    }

    /// `{x_keep : ∃ x_drop, x ∈ P}` by Fourier–Motzkin elimination.
    pub fn project(&self, keep: &[usize]) -> Result<Polytope> {
        fm::project(self, keep, &Tolerances::DEFAULT)
    }

    /// `inner ⊆ self` up to `tol` in the unit-row metric. Empty `inner` is
    /// contained in everything.
    pub fn contains(&self, inner: &Polytope, tol: f64) -> Result<bool> {
        self.check_dim(inner)?;
        if inner.is_empty() {
            return Ok(true);
        }
        let outer = self.normalize();
        if outer.is_canonical_empty() {
            return Ok(false);
        }
        for i in 0..outer.nrows() {
            let dir: Vec<f64> = outer.h.row(i).iter().copied().collect();
            match inner.support(&dir)? {
                Support::Finite(s) => {
                    if s > outer.k[i] + tol {
                        return Ok(false);
                    }
                }
                Support::Unbounded => return Ok(false),
                Support::Empty => return Ok(true),
            }
        }
        Ok(true)
    }

    /// Mutual containment with slack `tol`.
    pub fn set_equal(&self, other: &Polytope, tol: f64) -> Result<bool> {
        Ok(self.contains(other, tol)? && other.contains(self, tol)?)
    }

    /// The H-rep text block (`HPOLY rows dim` + one row per line).
    pub fn to_hpoly(&self) -> String {
        io::format_hpoly(self)
    }
}
