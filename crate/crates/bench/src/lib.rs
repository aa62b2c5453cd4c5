//! Fixtures shared by the solver benchmarks.

use csh_core::lie_cartan::{AlgebraSpec, CartanData, Family};
use csh_core::torus::default_sigma;
use csh_core::{Problem, Spectral, TorusGrid, VortexConfiguration};

/// A3 with one vortex per equation on the unit torus, at `factor · λ₀`.
pub fn a3_problem(m: usize, factor: f64) -> Problem {
    let cartan = CartanData::from_spec(&AlgebraSpec::simple(Family::A, 3)).expect("A3 is catalogued");
    let grid = TorusGrid::unit_square(m).expect("even grid");
    let mut vc = VortexConfiguration::new(3);
    for (i, (x, y)) in [(0.25, 0.25), (0.5, 0.75), (0.75, 0.3)].into_iter().enumerate() {
        vc.push(&grid, i, x, y, 1).expect("valid vortex");
    }
    let lambda = factor * cartan.lambda_threshold(&vc.counts(), grid.area());
    Problem::new(cartan, Spectral::new(grid), &vc, default_sigma(&grid), lambda).expect("valid problem")
}

/// Rank one with a single vortex at the cell centre, at `factor · λ₀`.
pub fn scalar_problem(m: usize, factor: f64) -> Problem {
    let cartan = CartanData::from_spec(&AlgebraSpec::simple(Family::A, 1)).expect("A1 is catalogued");
    let grid = TorusGrid::unit_square(m).expect("even grid");
    let mut vc = VortexConfiguration::new(1);
    vc.push(&grid, 0, 0.5, 0.5, 1).expect("valid vortex");
    let lambda = factor * cartan.lambda_threshold(&vc.counts(), grid.area());
    Problem::new(cartan, Spectral::new(grid), &vc, default_sigma(&grid), lambda).expect("valid problem")
}
