//! Redundant-row removal.
//!
//! Clarkson's scheme: each undecided row is tested by an LP over the rows
//! already known to be irredundant. When the test fails, a ray from an
//! interior point towards the LP optimiser exits through a facet, which is
//! then known to be irredundant. LP sizes stay near the final row count.

use nalgebra::{DMatrix, DVector};

use super::lp::{self, LpMax};
use super::{Polytope, Result};
use crate::tol::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Row {
    Unknown,
    Kept,
    Redundant,
}

pub(super) fn minimize(p: &Polytope, tol: &Tolerances) -> Result<Polytope> {
    let n = p.dim();
    let q = p.normalize();
    if q.is_canonical_empty() || q.is_empty() {
        return Ok(Polytope::empty(n));
    }
    if q.nrows() == 0 {
        return Ok(q);
    }
    let (a, b) = dedupe(&q);
    let m = a.nrows();
    let (center, radius, _) = q.depth(Some(1.0))?;

    let mut state = vec![Row::Unknown; m];
    if radius > 1e-11 {
        clarkson(&a, &b, &center, &mut state, tol)?;
    } else {
        for i in 0..m {
            let keep = direct_test(&a, &b, i, &state, tol)?;
            state[i] = if keep { Row::Kept } else { Row::Redundant };
        }
    }

    let kept: Vec<usize> = (0..m).filter(|&i| state[i] == Row::Kept).collect();
    let h = DMatrix::from_fn(kept.len(), n, |r, c| a[(kept[r], c)]);
    let k = DVector::from_fn(kept.len(), |r, _| b[kept[r]]);
    let out = Polytope::from_parts(h, k, q.generators().map(|g| g.to_vec()));
    let _ = out.empty.set(false);
    Ok(out)
}

/// Among rows with (numerically) identical normals keep the tightest.
fn dedupe(p: &Polytope) -> (DMatrix<f64>, DVector<f64>) {
    let n = p.dim();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(p.nrows());
    'outer: for (a, b) in p.rows() {
        for (ra, rb) in rows.iter_mut() {
            if ra.iter().zip(&a).all(|(x, y)| (x - y).abs() <= 1e-12) {
                if b < *rb {
                    *rb = b;
                }
                continue 'outer;
            }
        }
        rows.push((a, b));
    }
    let h = DMatrix::from_fn(rows.len(), n, |r, c| rows[r].0[c]);
    let k = DVector::from_fn(rows.len(), |r, _| rows[r].1);
    (h, k)
}

fn subsystem(a: &DMatrix<f64>, b: &DVector<f64>, rows: &[usize], cap: Option<(usize, f64)>) -> (DMatrix<f64>, DVector<f64>) {
    let n = a.ncols();
    let extra = usize::from(cap.is_some());
    let mut h = DMatrix::zeros(rows.len() + extra, n);
    let mut k = DVector::zeros(rows.len() + extra);
    for (r, &i) in rows.iter().enumerate() {
        h.row_mut(r).copy_from(&a.row(i));
        k[r] = b[i];
    }
    if let Some((i, bound)) = cap {
        h.row_mut(rows.len()).copy_from(&a.row(i));
        k[rows.len()] = bound;
    }
    (h, k)
}

/// Max of row `i` over the rows in `others` with a cap one unit beyond `b_i`.
fn row_max(a: &DMatrix<f64>, b: &DVector<f64>, i: usize, others: &[usize], tol: &Tolerances) -> Result<Option<(f64, DVector<f64>)>> {
    let (h, k) = subsystem(a, b, others, Some((i, b[i] + 1.0)));
    let dir: Vec<f64> = a.row(i).iter().copied().collect();
    match lp::maximize(&dir, &h, &k, tol.lp)? {
        LpMax::Finite { value, x } => Ok(Some((value, x))),
        _ => Ok(None),
    }
}

/// Tests row `i` against every row not yet marked redundant.
fn direct_test(a: &DMatrix<f64>, b: &DVector<f64>, i: usize, state: &[Row], tol: &Tolerances) -> Result<bool> {
    let others: Vec<usize> = (0..a.nrows()).filter(|&j| j != i && state[j] != Row::Redundant).collect();
    match row_max(a, b, i, &others, tol) {
        Ok(Some((value, _))) => Ok(value > b[i] + tol.redundancy),
        // Keeping a row never changes the set.
        _ => Ok(true),
    }
}

fn clarkson(a: &DMatrix<f64>, b: &DVector<f64>, center: &DVector<f64>, state: &mut [Row], tol: &Tolerances) -> Result<()> {
    let m = a.nrows();
    let mut kept: Vec<usize> = Vec::new();
    let slack = b - a * center;
    for i in 0..m {
        while state[i] == Row::Unknown {
            let found = match row_max(a, b, i, &kept, tol) {
                Ok(Some(r)) => r,
                _ => {
                    let keep = direct_test(a, b, i, state, tol)?;
                    state[i] = if keep { Row::Kept } else { Row::Redundant };
                    if keep {
                        kept.push(i);
                    }
                    break;
                }
            };
            let (value, x) = found;
            if value <= b[i] + tol.redundancy {
                state[i] = Row::Redundant;
                break;
            }
            let dir = &x - center;
            let mut best: Option<(usize, f64)> = None;
            for j in 0..m {
                if state[j] != Row::Unknown {
                    continue;
                }
                let den = a.row(j).dot(&dir.transpose());
                if den <= 1e-14 {
                    continue;
                }
                let t = slack[j] / den;
                if best.is_none_or(|(_, bt)| t < bt) {
                    best = Some((j, t));
                }
            }
            match best {
                Some((j, t)) if t <= 1.0 + 1e-9 => {
                    state[j] = Row::Kept;
                    kept.push(j);
                }
                _ => {
                    let keep = direct_test(a, b, i, state, tol)?;
                    state[i] = if keep { Row::Kept } else { Row::Redundant };
                    if keep {
                        kept.push(i);
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thin_slab_keeps_both_faces() {
        let eps = 1e-9;
        let p = Polytope::from_rows(
            2,
            &[
                (vec![1.0, 0.0], 1.0),
                (vec![-1.0, 0.0], 1.0),
                (vec![0.0, 1.0], 3.0 + eps),
                (vec![0.0, -1.0], -3.0 + eps),
                (vec![0.0, 1.0], 10.0),
                (vec![1.0, 1.0], 100.0),
            ],
        )
        .unwrap();
        let q = p.minimize().unwrap();
        assert_eq!(q.nrows(), 4);
        assert!(q.contains_point(&[0.5, 3.0], 0.0));
    }

    #[test]
    fn many_tangent_rows() {
        // 200 tangents of the unit circle plus 200 shifted-out copies.
        let mut rows = Vec::new();
        for i in 0..200 {
            let th = i as f64 * std::f64::consts::TAU / 200.0;
            rows.push((vec![th.cos(), th.sin()], 1.0));
            rows.push((vec![th.cos(), th.sin()], 1.5));
        }
        let p = Polytope::from_rows(2, &rows).unwrap();
        assert_eq!(p.minimize().unwrap().nrows(), 200);
    }
}
