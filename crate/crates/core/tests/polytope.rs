mod common;

use common::{max_dot, oracle_vertices, random_polytope, unit_dir};
use msh::polytope::{parse_hpoly, Polytope, Support};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn finite(s: Support) -> f64 {
    match s {
        Support::Finite(v) => v,
        other => panic!("expected a finite support, got {other:?}"),
    }
}

fn small_box(rng: &mut ChaCha8Rng, d: usize) -> Polytope {
    let lo: Vec<f64> = (0..d).map(|_| -rng.gen_range(0.01..0.2)).collect();
    let hi: Vec<f64> = (0..d).map(|_| rng.gen_range(0.01..0.2)).collect();
    Polytope::from_box(&lo, &hi).unwrap()
}

#[test]
fn support_matches_vertex_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..40 {
        let d = 2 + case % 2;
        let p = random_polytope(&mut rng, d, 8);
        let verts = oracle_vertices(&p);
        for _ in 0..25 {
            let dir = unit_dir(&mut rng, d);
            let s = finite(p.support(&dir).unwrap());
            assert!((s - max_dot(&verts, &dir)).abs() <= 1e-7, "case {case}");
        }
    }
}

#[test]
fn vertices_match_brute_force_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..30 {
        let p = random_polytope(&mut rng, 3, 9);
        let want = oracle_vertices(&p);
        let got = p.vertices().unwrap();
        assert_eq!(got.len(), want.len(), "case {case}");
        for v in &want {
            assert!(got.iter().any(|g| (g - v).amax() < 1e-7), "case {case}: missing {v}");
        }
    }
}

#[test]
fn elimination_matches_vertex_projection_on_50_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..50 {
        let p = random_polytope(&mut rng, 3, 10);
        let keep = match case % 3 {
            0 => vec![0, 1],
            1 => vec![0, 2],
            _ => vec![1, 2],
        };
        let proj = p.project(&keep).unwrap();
        let shadow: Vec<DVector<f64>> = oracle_vertices(&p)
            .iter()
            .map(|v| DVector::from_vec(keep.iter().map(|&i| v[i]).collect()))
            .collect();
        // Equal sets have equal support in every direction, including the
        // normals of the projection itself.
        let mut dirs: Vec<Vec<f64>> = (0..100).map(|_| unit_dir(&mut rng, 2)).collect();
        dirs.extend(proj.normalize().rows().map(|(a, _)| a));
        for dir in &dirs {
            let s = finite(proj.support(dir).unwrap());
            assert!((s - max_dot(&shadow, dir)).abs() <= 1e-6, "case {case}");
        }
    }
}

#[test]
fn nested_projection_composes() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let p = random_polytope(&mut rng, 3, 8);
        let two = p.project(&[0, 2]).unwrap().project(&[0]).unwrap();
        let one = p.project(&[0]).unwrap();
        assert!(two.set_equal(&one, 1e-7).unwrap());
    }
}

#[test]
fn pontryagin_difference_against_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_polytope(&mut rng, 2, 7);
    let b = small_box(&mut rng, 2);
    let diff = a.pontryagin_diff(&b).unwrap();
    let bv = oracle_vertices(&b);
    let samples: Vec<DVector<f64>> = bv
        .iter()
        .cloned()
        .chain((0..20).map(|_| {
            // Random points of the box: convex combinations of its corners.
            let w: Vec<f64> = (0..bv.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s: f64 = w.iter().sum();
            bv.iter().zip(&w).fold(DVector::zeros(2), |acc, (v, wi)| acc + v * (wi / s))
        }))
        .collect();
    let (lo, hi) = a.bounding_box().unwrap().unwrap();
    let mut pairs = 0usize;
    let mut inside = 0usize;
    for i in 0..100 {
        for j in 0..100 {
            let x = DVector::from_vec(vec![
                lo[0] + (hi[0] - lo[0]) * i as f64 / 99.0,
                lo[1] + (hi[1] - lo[1]) * j as f64 / 99.0,
            ]);
            // Oracle: x + v ∈ a for every sampled v, with a margin so points
            // on the boundary are not judged.
            let worst = samples
                .iter()
                .map(|v| a.max_violation((&x + v).as_slice()).unwrap().1)
                .fold(f64::NEG_INFINITY, f64::max);
            pairs += samples.len();
            if worst.abs() < 1e-9 {
                continue;
            }
            let want = worst < 0.0;
            inside += want as usize;
            assert_eq!(diff.contains_point(x.as_slice(), 1e-12), want, "x = {x}");
        }
    }
    assert!(pairs >= 10_000 * 20);
    assert!(inside > 100, "oracle region too small: {inside}");
}

#[test]
fn minkowski_support_is_additive() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let unit = Polytope::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
    let sq = unit.minkowski_sum(&unit).unwrap();
    assert!(sq.set_equal(&Polytope::from_box(&[0.0, 0.0], &[2.0, 2.0]).unwrap(), 1e-9).unwrap());
    for case in 0..20 {
        let d = 2 + case % 2;
        let (a, b) = (random_polytope(&mut rng, d, 6), random_polytope(&mut rng, d, 5));
        let sum = a.minkowski_sum(&b).unwrap();
        for _ in 0..100 {
            let dir = unit_dir(&mut rng, d);
            let want = finite(a.support(&dir).unwrap()) + finite(b.support(&dir).unwrap());
            assert!((finite(sum.support(&dir).unwrap()) - want).abs() <= 1e-6, "case {case}");
        }
    }
}

#[test]
fn difference_then_sum_stays_inside() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut strict = 0;
    for case in 0..50 {
        let d = 2 + case % 2;
        let a = random_polytope(&mut rng, d, 7);
        let b = small_box(&mut rng, d);
        let back = a.pontryagin_diff(&b).unwrap().minkowski_sum(&b).unwrap();
        assert!(a.contains(&back, 1e-7).unwrap(), "case {case}");
        if !back.contains(&a, 1e-7).unwrap() {
            strict += 1;
        }
        assert!(a.pontryagin_diff(&Polytope::singleton(&vec![0.0; d])).unwrap().set_equal(&a, 1e-9).unwrap());
    }
    // Sharp corners get rounded off, so some instances lose volume.
    assert!(strict > 0);
}

#[test]
fn difference_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let big = random_polytope(&mut rng, 2, 6);
        let cut = random_polytope(&mut rng, 2, 6);
        let small = big.intersect(&cut).unwrap();
        let c = small_box(&mut rng, 2);
        let ds = small.pontryagin_diff(&c).unwrap();
        let db = big.pontryagin_diff(&c).unwrap();
        assert!(db.contains(&ds, 1e-7).unwrap());
    }
}

#[test]
fn affine_map_matches_mapped_vertices() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let p = random_polytope(&mut rng, 3, 8);
        let t = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        let img = p.affine_map(&t).unwrap();
        let mapped: Vec<DVector<f64>> = oracle_vertices(&p).iter().map(|v| &t * v).collect();
        for _ in 0..50 {
            let dir = unit_dir(&mut rng, 3);
            assert!((finite(img.support(&dir).unwrap()) - max_dot(&mapped, &dir)).abs() <= 1e-6);
        }
        // Pre-image of the image contains the original.
        assert!(img.affine_preimage(&t).unwrap().contains(&p, 1e-7).unwrap());
    }
}

#[test]
fn chebyshev_ball_fits() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..20 {
        let p = random_polytope(&mut rng, 3, 8);
        let (c, r) = p.chebyshev_center().unwrap().unwrap();
        assert!(r >= 0.3 - 1e-9);
        let n = p.normalize();
        for (a, b) in n.rows() {
            let ac: f64 = a.iter().zip(c.iter()).map(|(x, y)| x * y).sum();
            assert!(ac + r <= b + 1e-8);
        }
    }
}

fn poly_strategy() -> impl Strategy<Value = (usize, u64, usize)> {
    (2usize..=3, any::<u64>(), 4usize..10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn minimize_preserves_the_set((d, seed, rows) in poly_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_polytope(&mut rng, d, rows);
        let m = p.minimize().unwrap();
        prop_assert!(m.nrows() <= p.nrows());
        prop_assert!(m.set_equal(&p, 1e-7).unwrap());
        // Every kept row touches the set.
        let verts = oracle_vertices(&p);
        for (a, b) in m.normalize().rows() {
            prop_assert!((max_dot(&verts, &a) - b).abs() <= 1e-7);
        }
    }

    #[test]
    fn redundant_rows_are_removed((d, seed, rows) in poly_strategy(), extra in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_polytope(&mut rng, d, rows);
        let base = p.minimize().unwrap();
        let mut all: Vec<(Vec<f64>, f64)> = p.rows().collect();
        for _ in 0..extra {
            let dir = unit_dir(&mut rng, d);
            let s = finite(p.support(&dir).unwrap());
            all.push((dir, s + rng.gen_range(0.01..1.0)));
        }
        // Duplicates and scaled copies of existing rows.
        let (a0, b0) = all[0].clone();
        all.push((a0.iter().map(|v| v * 3.0).collect(), b0 * 3.0));
        all.push((a0, b0));
        let noisy = Polytope::from_rows(d, &all).unwrap().minimize().unwrap();
        prop_assert_eq!(noisy.nrows(), base.nrows());
        prop_assert!(noisy.set_equal(&base, 1e-9).unwrap());
    }

    #[test]
    fn row_order_and_scaling_do_not_matter((d, seed, rows) in poly_strategy(), shift in 0usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_polytope(&mut rng, d, rows);
        let mut all: Vec<(Vec<f64>, f64)> = p.rows().collect();
        let len = all.len();
        all.rotate_left(shift % len);
        let scaled: Vec<(Vec<f64>, f64)> = all
            .iter()
            .enumerate()
            .map(|(i, (a, b))| {
                let s = 1.0 + i as f64;
                (a.iter().map(|v| v * s).collect(), b * s)
            })
            .collect();
        let q = Polytope::from_rows(d, &scaled).unwrap();
        prop_assert!(q.set_equal(&p, 1e-9).unwrap());
        prop_assert!(q.normalize().set_equal(&p, 1e-9).unwrap());
    }

    #[test]
    fn text_format_round_trips((d, seed, rows) in poly_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_polytope(&mut rng, d, rows);
        let back = parse_hpoly(&p.to_hpoly()).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn intersection_is_pointwise((seed, px, py) in (any::<u64>(), -3.0f64..3.0, -3.0f64..3.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_polytope(&mut rng, 2, 5);
        let b = random_polytope(&mut rng, 2, 5);
        let both = a.intersect(&b).unwrap();
        let x = [px, py];
        let va = a.max_violation(&x).unwrap().1;
        let vb = b.max_violation(&x).unwrap().1;
        let margin = va.max(vb);
        if margin.abs() > 1e-9 {
            prop_assert_eq!(both.contains_point(&x, 1e-12), margin < 0.0);
        }
    }
}
