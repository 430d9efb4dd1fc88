//! Fixtures shared by the criterion benchmarks.

use neutral_core::verifier::{rasterize, ConductivityField, Grid};
use neutral_core::{EllipsoidSpec, MatchingProblem, MaterialPair};

/// Triaxial prototype used throughout the benchmarks.
pub fn triaxial() -> EllipsoidSpec {
    EllipsoidSpec::new([1.0, 2.0, 3.0], 1.0, 4.0).expect("valid prototype")
}

pub fn matching_problem(p: f64) -> MatchingProblem {
    MatchingProblem::new(10.0, 1.0, 1.0, 1.0 / 6.0, p).expect("valid problem")
}

/// Coated sphere with half its volume in the core.
pub fn half_sphere() -> EllipsoidSpec {
    EllipsoidSpec::sphere(0.5f64.cbrt(), 1.0).expect("valid sphere")
}

/// Neutral p = 2 cell (σ₁ = 10, σ₂ = 1, σ* = 2.8) at `n` cells per axis.
pub fn neutral_cell(n: usize) -> ConductivityField {
    let spec = half_sphere();
    let mat = MaterialPair::linear(10.0, 1.0).expect("valid materials");
    let grid = Grid::for_spec(&spec, n).expect("valid grid");
    rasterize(&spec, &mat, 2.8, &grid, 4).expect("inclusion fits")
}
