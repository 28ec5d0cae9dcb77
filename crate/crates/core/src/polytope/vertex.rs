//! Vertex enumeration by intersecting `n`-subsets of facet rows (n ≤ 3).

use nalgebra::{DMatrix, DVector};

use super::{Polytope, PolytopeError, Result, MAX_VERTEX_DIM};

pub(super) fn enumerate(p: &Polytope) -> Result<Vec<DVector<f64>>> {
    let n = p.dim();
    if n > MAX_VERTEX_DIM {
        return Err(PolytopeError::Unsupported(n));
    }
    if p.is_empty() {
        return Ok(Vec::new());
    }
    if !p.is_bounded()? {
        return Err(PolytopeError::Unbounded);
    }
    if n == 0 {
        return Ok(vec![DVector::zeros(0)]);
    }
    let q = p.minimize()?;
    let m = q.nrows();
    let a = q.a();
    let b = q.b();
    let scale = 1.0 + b.amax();
    let feas = 1e-9 * scale;
    let merge = 1e-8 * scale;

    let mut out: Vec<DVector<f64>> = Vec::new();
    let mut idx = vec![0usize; n];
    let mut push = |x: DVector<f64>| {
        if !out.iter().any(|v: &DVector<f64>| (v - &x).amax() <= merge) {
            out.push(x);
        }
    };
    // Iterate over increasing index tuples.
    fn advance(idx: &mut [usize], m: usize) -> bool {
        let n = idx.len();
        let mut k = n;
        while k > 0 {
            k -= 1;
            if idx[k] < m - (n - k) {
                idx[k] += 1;
                for j in k + 1..n {
                    idx[j] = idx[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    if m < n {
        return Ok(q.chebyshev_center()?.map(|(c, _)| vec![c]).unwrap_or_default());
    }
    for (k, v) in idx.iter_mut().enumerate() {
        *v = k;
    }
    loop {
        let sub = DMatrix::from_fn(n, n, |r, c| a[(idx[r], c)]);
        let det = sub.determinant();
        if det.abs() > 1e-12 {
            let rhs = DVector::from_fn(n, |r, _| b[idx[r]]);
            if let Some(x) = sub.lu().solve(&rhs) {
                let viol = (a * &x - b).max();
                if viol <= feas {
                    push(x);
                }
            }
        }
        if !advance(&mut idx, m) {
            break;
        }
    }
    if out.is_empty() {
        // Lower-dimensional sets whose facet rows never meet in a regular
        // n-subset: fall back to a point on the set.
        if let Some((c, _)) = q.chebyshev_center()? {
            out.push(c);
        }
    }
    Ok(out)
}
