#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};

use msh::cruise::{family_dirs, offline_families, read_family, write_family, CruiseParams, SliceFamily};
use msh::polytope::{BoxSet, Polytope};
use msh::sets::{LtiSystem, SetsError};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Brute-force vertex enumeration: solve every d-subset of rows and keep the
/// feasible, deduplicated solutions.
pub fn oracle_vertices(p: &Polytope) -> Vec<DVector<f64>> {
    let d = p.dim();
    let (h, k) = (p.a(), p.b());
    let rows = k.len();
    let mut out: Vec<DVector<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..d).collect();
    if rows < d {
        return out;
    }
    loop {
        let a = DMatrix::from_fn(d, d, |r, c| h[(idx[r], c)]);
        let b = DVector::from_fn(d, |r, _| k[idx[r]]);
        if a.clone().determinant().abs() > 1e-10 {
            if let Some(x) = a.lu().solve(&b) {
                let ok = (0..rows).all(|i| (h.row(i) * &x)[0] <= k[i] + 1e-9 * (1.0 + k[i].abs()));
                if ok && !out.iter().any(|v| (v - &x).amax() < 1e-8) {
                    out.push(x);
                }
            }
        }
        // Next combination.
        let mut i = d;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < rows - d + i {
                idx[i] += 1;
                for j in i + 1..d {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn max_dot(points: &[DVector<f64>], dir: &[f64]) -> f64 {
    points
        .iter()
        .map(|v| v.iter().zip(dir).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn unit_dir(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Random bounded polytope containing a ball of radius ≥ 0.3 around `centre`.
pub fn random_polytope(rng: &mut ChaCha8Rng, d: usize, rows: usize) -> Polytope {
    let centre: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut out = Vec::new();
    for _ in 0..rows {
        let a = unit_dir(rng, d);
        let off = rng.gen_range(0.3..1.5);
        let b = a.iter().zip(&centre).map(|(x, c)| x * c).sum::<f64>() + off;
        out.push((a, b));
    }
    // Bounding box keeps everything bounded whatever the random normals.
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        out.push((e.clone(), centre[i] + 2.0));
        e[i] = -1.0;
        out.push((e, -centre[i] + 2.0));
    }
    Polytope::from_rows(d, &out).unwrap()
}

/// Slice families for the default cruise parameters, shared across test
/// binaries through a directory under the cargo target dir.
pub fn families(holds: &[usize]) -> BTreeMap<usize, Arc<SliceFamily>> {
    static CACHE: OnceLock<Mutex<BTreeMap<usize, Arc<SliceFamily>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let p = CruiseParams::default();
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("msh-families");
    let mut out = BTreeMap::new();
    for &m in holds {
        let mut guard = cache.lock().unwrap();
        if let Some(f) = guard.get(&m) {
            out.insert(m, f.clone());
            continue;
        }
        let fam = match read_family(&root, &p, m) {
            Ok(f) => f,
            Err(_) => {
                let fam = offline_families(&p, m).expect("offline families");
                // Write into a private directory, then move into place so a
                // concurrent test binary never reads a half-written archive.
                let tmp = root.join(format!("tmp-{}-{m}", std::process::id()));
                let _ = std::fs::remove_dir_all(&tmp);
                write_family(&tmp, &p, &fam, true).expect("write family");
                let (lo, hi) = family_dirs(&root, m);
                let (tlo, thi) = family_dirs(&tmp, m);
                std::fs::create_dir_all(lo.parent().unwrap()).unwrap();
                let _ = std::fs::remove_dir_all(&lo);
                let _ = std::fs::remove_dir_all(&hi);
                let _ = std::fs::rename(&tlo, &lo);
                let _ = std::fs::rename(&thi, &hi);
                let _ = std::fs::remove_dir_all(&tmp);
                fam
            }
        };
        let fam = Arc::new(fam);
        guard.insert(m, fam.clone());
        out.insert(m, fam);
    }
    out
}

/// Exact membership test for the hold precursor of a single-input system:
/// every constraint is affine in the held input, so feasibility is an interval
/// intersection. Returns the width of the feasible input interval (negative
/// when empty).
pub fn hold_oracle(sys: &LtiSystem, x_set: &Polytope, u: (f64, f64), s: &Polytope, w: &[BoxSet], m: usize, x: &DVector<f64>) -> f64 {
    let (mut lo, mut hi) = u;
    let mut ax = x.clone();
    let mut bsum = DVector::zeros(sys.n());
    // Disturbance maps: effect of w_j on x_t is A^{t−1−j} E.
    let mut w_maps: Vec<DMatrix<f64>> = Vec::new();
    for t in 1..=m {
        ax = sys.a() * ax;
        bsum = sys.a() * bsum + sys.b().column(0);
        for g in w_maps.iter_mut() {
            *g = sys.a() * &*g;
        }
        w_maps.push(sys.e().clone());
        let set = if t == m { s } else { x_set };
        for (row, b) in set.rows() {
            let a = DVector::from_vec(row);
            let worst: f64 = w_maps
                .iter()
                .enumerate()
                .map(|(j, g)| w[j % w.len()].support((g.transpose() * &a).as_slice()))
                .sum();
            let coef = a.dot(&bsum);
            let rhs = b - a.dot(&ax) - worst;
            if coef.abs() < 1e-14 {
                if rhs < 0.0 {
                    return rhs;
                }
            } else if coef > 0.0 {
                hi = hi.min(rhs / coef);
            } else {
                lo = lo.max(rhs / coef);
            }
        }
    }
    hi - lo
}

/// Random 2-state, 1-input system with a disturbance on both states.
pub fn random_system(rng: &mut ChaCha8Rng) -> LtiSystem {
    let th: f64 = rng.gen_range(-0.6..0.6);
    let r: f64 = rng.gen_range(0.8..1.15);
    let a = DMatrix::from_row_slice(2, 2, &[r * th.cos(), -r * th.sin(), r * th.sin(), r * th.cos()]);
    let b = DMatrix::from_column_slice(2, 1, &[rng.gen_range(-1.0..1.0), rng.gen_range(0.3..1.0)]);
    LtiSystem::new(a, b, DMatrix::identity(2, 2), 1.0).unwrap()
}

pub fn square(r: f64) -> Polytope {
    Polytope::from_box(&[-r, -r], &[r, r]).unwrap()
}

/// `None` when the iteration did not settle; finite termination is not
/// guaranteed for every system.
pub fn settled<T>(r: Result<T, SetsError>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(SetsError::NoConvergence { .. }) => None,
        Err(e) => panic!("{e}"),
    }
}
