//! Minkowski sum, Pontryagin difference, projection and vertices.

use msh::polytope::Polytope;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let square = Polytope::from_box(&[-1.0, -1.0], &[1.0, 1.0])?;
    let small = Polytope::from_box(&[-0.25, -0.1], &[0.25, 0.1])?;

    let grown = square.minkowski_sum(&small)?;
    let eroded = square.pontryagin_diff(&small)?;
    println!("square ⊕ small: {} rows, vertices {:?}", grown.nrows(), corners(&grown)?);
    println!("square ⊖ small: {} rows, vertices {:?}", eroded.nrows(), corners(&eroded)?);
    println!("(square ⊖ small) ⊕ small ⊆ square: {}", square.contains(&eroded.minkowski_sum(&small)?, 1e-9)?);

    // A tilted 3-D box projected onto its first two coordinates.
    let cube = Polytope::from_rows(
        3,
        &[
            (vec![1.0, 0.0, 1.0], 1.0),
            (vec![-1.0, 0.0, -1.0], 1.0),
            (vec![0.0, 1.0, 0.0], 1.0),
            (vec![0.0, -1.0, 0.0], 1.0),
            (vec![0.0, 0.0, 1.0], 0.5),
            (vec![0.0, 0.0, -1.0], 0.5),
        ],
    )?;
    let shadow = cube.project(&[0, 1])?;
    println!("projection onto (x, y): vertices {:?}", corners(&shadow)?);
    if let Some((c, r)) = shadow.chebyshev_center()? {
        println!("chebyshev centre ({:.3}, {:.3}), radius {r:.3}", c[0], c[1]);
    }
    Ok(())
}

fn corners(p: &Polytope) -> Result<Vec<(f64, f64)>, Box<dyn std::error::Error>> {
    let mut v: Vec<(f64, f64)> = p.vertices()?.iter().map(|v| (round(v[0]), round(v[1]))).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(v)
}

fn round(x: f64) -> f64 {
    (x * 1e6).round() / 1e6 + 0.0
}
