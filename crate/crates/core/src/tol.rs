use serde::{Deserialize, Serialize};

/// Every numerical threshold used by the geometry and set layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Residual tolerance handed to the LP/QP solver.
    pub lp: f64,
    /// Containment / equality slack, in the unit-normal row metric.
    pub set: f64,
    /// A row is redundant when its LP maximum exceeds its offset by at most this.
    pub redundancy: f64,
    /// A polytope whose Chebyshev depth is below `-empty` is empty.
    pub empty: f64,
    /// Fixed-point iterates whose bounding box is narrower than this in every
    /// coordinate have collapsed to a point and are reported empty.
    pub collapse: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        lp: 1e-8,
        set: 1e-7,
        redundancy: 1e-9,
        empty: 1e-7,
        collapse: 1e-6,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances::DEFAULT
    }
}
