//! `HPOLY` text format: a header `HPOLY <rows> <dim>` then one row
//! `a_1 … a_dim b` per line, meaning `a·x ≤ b`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{Polytope, PolytopeError, Result};

pub(super) fn format_hpoly(p: &Polytope) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "HPOLY {} {}", p.nrows(), p.dim());
    for i in 0..p.nrows() {
        let mut first = true;
        for v in p.a().row(i).iter().chain(std::iter::once(&p.b()[i])) {
            if !first {
                s.push(' ');
            }
            first = false;
            // Display for f64 is the shortest string that round-trips.
            let _ = write!(s, "{v}");
        }
        s.push('\n');
    }
    s
}

pub fn parse_hpoly(text: &str) -> Result<Polytope> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| PolytopeError::Parse("missing header".into()))?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some("HPOLY") {
        return Err(PolytopeError::Parse(format!("bad header {header:?}")));
    }
    let mut num = |what: &str| -> Result<usize> {
        tok.next()
            .ok_or_else(|| PolytopeError::Parse(format!("header lacks {what}")))?
            .parse()
            .map_err(|e| PolytopeError::Parse(format!("{what}: {e}")))
    };
    let rows = num("row count")?;
    let dim = num("dimension")?;
    let mut h = DMatrix::zeros(rows, dim);
    let mut k = DVector::zeros(rows);
    for i in 0..rows {
        let line = lines.next().ok_or_else(|| PolytopeError::Parse(format!("expected {rows} rows, got {i}")))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| PolytopeError::Parse(format!("row {i}: {e}"))))
            .collect::<Result<_>>()?;
        if vals.len() != dim + 1 {
            return Err(PolytopeError::Parse(format!("row {i}: expected {} numbers, got {}", dim + 1, vals.len())));
        }
        for j in 0..dim {
            h[(i, j)] = vals[j];
        }
        k[i] = vals[dim];
    }
    if lines.next().is_some() {
        return Err(PolytopeError::Parse("trailing data after rows".into()));
    }
    Polytope::new(h, k)
}

pub fn read_hpoly(path: &Path) -> Result<Polytope> {
    let text = std::fs::read_to_string(path).map_err(|e| PolytopeError::Io(format!("{}: {e}", path.display())))?;
    parse_hpoly(&text)
}

pub fn write_hpoly(path: &Path, p: &Polytope) -> Result<()> {
    std::fs::write(path, format_hpoly(p)).map_err(|e| PolytopeError::Io(format!("{}: {e}", path.display())))
}
