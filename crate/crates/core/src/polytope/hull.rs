//! Convex hull of a point cloud, returned in H-representation.
//!
//! Points are first reduced to their affine hull (SVD), the hull is taken
//! in that subspace (interval, monotone chain or incremental 3-D), and the
//! complementary directions become equality pairs.

use nalgebra::{DMatrix, DVector};

use super::{Polytope, PolytopeError, Result, MAX_VERTEX_DIM};

pub(super) fn hull(points: &[DVector<f64>], dim: usize) -> Result<Polytope> {
    if points.iter().any(|p| p.len() != dim) {
        let bad = points.iter().find(|p| p.len() != dim).map_or(0, |p| p.len());
        return Err(PolytopeError::DimensionMismatch(bad, dim));
    }
    if points.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(PolytopeError::NonFinite);
    }
    if points.is_empty() {
        return Ok(Polytope::empty(dim));
    }
    let scale = 1.0 + points.iter().map(|p| p.amax()).fold(0.0, f64::max);
    let pts = dedupe(points, 1e-12 * scale);
    let k = pts.len();
    let mut centroid = DVector::zeros(dim);
    for p in &pts {
        centroid += p;
    }
    centroid /= k as f64;

    let (basis, complement) = if k == 1 || dim == 0 {
        (DMatrix::zeros(dim, 0), DMatrix::identity(dim, dim))
    } else {
        affine_basis(&pts, &centroid, 1e-10 * scale)
    };
    let r = basis.ncols();
    if r > MAX_VERTEX_DIM {
        return Err(PolytopeError::Unsupported(r));
    }
    let local: Vec<DVector<f64>> = pts.iter().map(|p| basis.transpose() * (p - &centroid)).collect();

    // (normal in local coords, offset, extreme point indices)
    let (facets, extreme): (Vec<(DVector<f64>, f64)>, Vec<usize>) = match r {
        0 => (vec![], vec![0]),
        1 => interval(&local),
        2 => polygon(&local, 1e-12 * scale),
        _ => polyhedron(&local, 1e-10 * scale),
    };

    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(facets.len() + 2 * complement.ncols());
    for (nl, off) in &facets {
        let nx = &basis * nl;
        let norm = nx.norm();
        let b = off + nx.dot(&centroid);
        rows.push(((nx / norm).iter().copied().collect(), b / norm));
    }
    for c in 0..complement.ncols() {
        let u = complement.column(c).into_owned();
        let b = u.dot(&centroid);
        rows.push((u.iter().copied().collect(), b));
        rows.push((u.iter().map(|v| -v).collect(), -b));
    }
    let h = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i].0[j]);
    let kv = DVector::from_fn(rows.len(), |i, _| rows[i].1);
    let gens: Vec<DVector<f64>> = extreme.iter().map(|&i| pts[i].clone()).collect();
    let p = Polytope::from_parts(h, kv, Some(gens));
    let _ = p.empty.set(false);
    Ok(p)
}

fn dedupe(points: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(points.len());
    for p in points {
        if !out.iter().any(|q| (q - p).amax() <= tol) {
            out.push(p.clone());
        }
    }
    out
}

/// Orthonormal bases of the affine hull directions and its complement.
fn affine_basis(pts: &[DVector<f64>], centroid: &DVector<f64>, tol: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let dim = centroid.len();
    let mut centered = DMatrix::zeros(dim, pts.len().max(dim));
    for (j, p) in pts.iter().enumerate() {
        centered.set_column(j, &(p - centroid));
    }
    let svd = centered.svd(true, false);
    let u = svd.u.expect("requested U");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let rank = idx.iter().filter(|&&i| svd.singular_values[i] > tol).count();
    let take = |sel: &[usize]| {
        let mut m = DMatrix::zeros(dim, sel.len());
        for (c, &i) in sel.iter().enumerate() {
            m.set_column(c, &u.column(i));
        }
        m
    };
    (take(&idx[..rank]), take(&idx[rank..dim]))
}

fn interval(local: &[DVector<f64>]) -> (Vec<(DVector<f64>, f64)>, Vec<usize>) {
    let (mut lo, mut hi) = (0, 0);
    for (i, p) in local.iter().enumerate() {
        if p[0] < local[lo][0] {
            lo = i;
        }
        if p[0] > local[hi][0] {
            hi = i;
        }
    }
    let facets = vec![
        (DVector::from_element(1, 1.0), local[hi][0]),
        (DVector::from_element(1, -1.0), -local[lo][0]),
    ];
    (facets, vec![lo, hi])
}

fn cross2(o: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; returns outward edge normals.
fn polygon(local: &[DVector<f64>], tol: f64) -> (Vec<(DVector<f64>, f64)>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..local.len()).collect();
    idx.sort_by(|&i, &j| local[i][0].total_cmp(&local[j][0]).then(local[i][1].total_cmp(&local[j][1])));
    let mut chain: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in 0..2 {
        let start = chain.len();
        let iter: Box<dyn Iterator<Item = &usize>> =
            if pass == 0 { Box::new(idx.iter()) } else { Box::new(idx.iter().rev()) };
        for &i in iter {
            while chain.len() >= start + 2
                && cross2(&local[chain[chain.len() - 2]], &local[chain[chain.len() - 1]], &local[i]) <= tol
            {
                chain.pop();
            }
            chain.push(i);
        }
        chain.pop();
    }
    let mut facets = Vec::with_capacity(chain.len());
    for e in 0..chain.len() {
        let a = &local[chain[e]];
        let b = &local[chain[(e + 1) % chain.len()]];
        // CCW order: outward normal is the edge rotated clockwise.
        let nrm = DVector::from_column_slice(&[b[1] - a[1], a[0] - b[0]]);
        let len = nrm.norm();
        if len == 0.0 {
            continue;
        }
        let nrm = nrm / len;
        let off = nrm.dot(a);
        facets.push((nrm, off));
    }
    (facets, chain)
}

/// Incremental 3-D hull over triangles; coplanar triangles are merged.
fn polyhedron(local: &[DVector<f64>], tol: f64) -> (Vec<(DVector<f64>, f64)>, Vec<usize>) {
    let p = |i: usize| nalgebra::Vector3::new(local[i][0], local[i][1], local[i][2]);
    let n = local.len();

    let i0 = (0..n).min_by(|&a, &b| local[a][0].total_cmp(&local[b][0])).unwrap();
    let i1 = (0..n).max_by(|&a, &b| (p(a) - p(i0)).norm().total_cmp(&(p(b) - p(i0)).norm())).unwrap();
    let line = (p(i1) - p(i0)).normalize();
    let dist_line = |i: usize| {
        let d = p(i) - p(i0);
        (d - line * d.dot(&line)).norm()
    };
    let i2 = (0..n).max_by(|&a, &b| dist_line(a).total_cmp(&dist_line(b))).unwrap();
    let pn = (p(i1) - p(i0)).cross(&(p(i2) - p(i0))).normalize();
    let i3 = (0..n).max_by(|&a, &b| pn.dot(&(p(a) - p(i0))).abs().total_cmp(&pn.dot(&(p(b) - p(i0))).abs())).unwrap();

    let inside = (p(i0) + p(i1) + p(i2) + p(i3)) / 4.0;
    let plane = |f: &[usize; 3]| {
        let nrm = (p(f[1]) - p(f[0])).cross(&(p(f[2]) - p(f[0])));
        let len = nrm.norm();
        let nrm = if len > 0.0 { nrm / len } else { nrm };
        (nrm, nrm.dot(&p(f[0])))
    };
    let orient = |f: [usize; 3]| {
        let (nrm, off) = plane(&f);
        if nrm.dot(&inside) > off { [f[0], f[2], f[1]] } else { f }
    };
    let mut faces: Vec<[usize; 3]> = vec![
        orient([i0, i1, i2]),
        orient([i0, i1, i3]),
        orient([i0, i2, i3]),
        orient([i1, i2, i3]),
    ];

    for q in 0..n {
        if [i0, i1, i2, i3].contains(&q) {
            continue;
        }
        let pq = p(q);
        let visible: Vec<bool> = faces
            .iter()
            .map(|f| {
                let (nrm, off) = plane(f);
                nrm.dot(&pq) - off > tol
            })
            .collect();
        if !visible.iter().any(|v| *v) {
            continue;
        }
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for (f, vis) in faces.iter().zip(&visible) {
            if *vis {
                edges.extend([(f[0], f[1]), (f[1], f[2]), (f[2], f[0])]);
            }
        }
        let horizon: Vec<(usize, usize)> =
            edges.iter().copied().filter(|&(a, b)| !edges.contains(&(b, a))).collect();
        let mut next: Vec<[usize; 3]> =
            faces.iter().zip(&visible).filter(|(_, v)| !**v).map(|(f, _)| *f).collect();
        for (a, b) in horizon {
            next.push([a, b, q]);
        }
        faces = next;
    }

    let mut facets: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut used: Vec<usize> = Vec::new();
    for f in &faces {
        let (nrm, off) = plane(f);
        if nrm.norm() == 0.0 {
            continue;
        }
        for &v in f {
            if !used.contains(&v) {
                used.push(v);
            }
        }
        let nv = DVector::from_column_slice(nrm.as_slice());
        if let Some(existing) = facets.iter_mut().find(|(e, _)| (e - &nv).amax() < 1e-9) {
            existing.1 = existing.1.max(off);
        } else {
            facets.push((nv, off));
        }
    }
    used.sort_unstable();
    (facets, used)
}
