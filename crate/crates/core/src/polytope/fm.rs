//! Fourier–Motzkin projection.

use nalgebra::{DMatrix, DVector};

use super::{Polytope, PolytopeError, Result};
use crate::tol::Tolerances;

const ZERO: f64 = 1e-12;

pub(super) fn project(p: &Polytope, keep: &[usize], tol: &Tolerances) -> Result<Polytope> {
    let n = p.dim();
    if keep.is_empty() {
        return Err(PolytopeError::BadDims("no coordinates kept".into()));
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PolytopeError::BadDims("kept coordinates must be strictly increasing".into()));
    }
    if keep[keep.len() - 1] >= n {
        return Err(PolytopeError::BadDims(format!("coordinate {} out of range", keep[keep.len() - 1])));
    }
    if p.is_empty() {
        return Ok(Polytope::empty(keep.len()));
    }

    // Columns still present, in original order.
    let mut cols: Vec<usize> = (0..n).collect();
    let mut cur = p.minimize_with(tol)?;
    while cols.len() > keep.len() {
        let a = cur.a();
        let counts = |c: usize| {
            let pos = (0..cur.nrows()).filter(|&i| a[(i, c)] > ZERO).count();
            let neg = (0..cur.nrows()).filter(|&i| a[(i, c)] < -ZERO).count();
            pos * neg
        };
        let elim = (0..cols.len())
            .filter(|&c| !keep.contains(&cols[c]))
            .min_by_key(|&c| (counts(c), c))
            .expect("a dropped column remains");
        cur = eliminate(&cur, elim);
        cols.remove(elim);
        if cur.is_canonical_empty() {
            return Ok(Polytope::empty(keep.len()));
        }
        cur = cur.minimize_with(tol)?;
        if cur.is_canonical_empty() {
            return Ok(Polytope::empty(keep.len()));
        }
    }
    Ok(cur)
}

/// Eliminates local column `c`; the result has one column fewer.
fn eliminate(p: &Polytope, c: usize) -> Polytope {
    let n = p.dim();
    let a = p.a();
    let b = p.b();
    let (mut pos, mut neg, mut zero) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..p.nrows() {
        let v = a[(i, c)];
        if v > ZERO {
            pos.push(i);
        } else if v < -ZERO {
            neg.push(i);
        } else {
            zero.push(i);
        }
    }
    let reduced = |i: usize, w: f64| -> Vec<f64> { (0..n).filter(|&j| j != c).map(|j| a[(i, j)] * w).collect() };
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(zero.len() + pos.len() * neg.len());
    for &i in &zero {
        rows.push((reduced(i, 1.0), b[i]));
    }
    for &i in &pos {
        let wi = 1.0 / a[(i, c)];
        for &j in &neg {
            let wj = -1.0 / a[(j, c)];
            let ri = reduced(i, wi);
            let rj = reduced(j, wj);
            rows.push((ri.iter().zip(&rj).map(|(x, y)| x + y).collect(), b[i] * wi + b[j] * wj));
        }
    }
    let h = DMatrix::from_fn(rows.len(), n - 1, |r, k| rows[r].0[k]);
    let k = DVector::from_fn(rows.len(), |r, _| rows[r].1);
    Polytope::from_parts(h, k, None).normalize()
}
