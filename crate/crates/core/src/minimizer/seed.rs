use nalgebra::DMatrix;

use super::{minimize, DescentConfig, Problem, Seed, SolveError, SolverConfig};
use crate::lie_cartan::{AlgebraSpec, CartanData, Family};
use crate::torus::{coefficients_a, Field};

/// Mean-zero seed built from independent scalar solutions.
#[derive(Clone, Debug)]
pub struct TarantelloSeed {
    pub w: Vec<Field>,
    /// Scalar coupling used per index (`0` where `N_i = 0`).
    pub mu: Vec<f64>,
    /// `a_ij(w)` of the seed.
    pub a_matrix: DMatrix<f64>,
    /// Whether every `a_ij(w) < 2|Ω|`.
    pub targets_met: bool,
}

/// Solve `Δv = μ e^{u⁰_i+v}(e^{u⁰_i+v} − 1) + 4πN_i/|Ω|` for each index at
/// `μ = mu_factor · 16πN_i/|Ω|` and keep the mean-zero parts.
pub fn tarantello_seed(
    problem: &Problem,
    mu_factor: f64,
    descent: &DescentConfig,
) -> Result<TarantelloSeed, SolveError> {
    if !(mu_factor > 1.0) {
        return Err(SolveError::Config(format!("mu_factor must exceed 1, got {mu_factor}")));
    }
    let scalar = CartanData::from_spec(&AlgebraSpec::simple(Family::A, 1))?;
    let grid = *problem.spectral().grid();
    let mut w = Vec::with_capacity(problem.rank());
    let mut mu = Vec::with_capacity(problem.rank());
    for (i, &ni) in problem.counts().iter().enumerate() {
        if ni == 0 {
            w.push(Field::zeros(grid));
            mu.push(0.0);
            continue;
        }
        let bg = problem.background().component(i);
        let m = mu_factor * scalar.lambda_threshold(&[ni], grid.area());
        let sub = Problem::from_background(scalar.clone(), problem.spectral().clone(), bg, m)?;
        let sol = minimize(
            &sub,
            &SolverConfig {
                descent: descent.clone(),
                seed: Seed::Zero,
            },
        )?;
        if !sol.converged() {
            return Err(SolveError::Seed(format!(
                "scalar solve for index {i} ended with {:?}",
                sol.termination
            )));
        }
        w.push(sol.state.w[0].clone().without_mean());
        mu.push(m);
    }
    let coeffs = coefficients_a(problem.background(), &w)?;
    let limit = 2.0 * grid.area();
    let targets_met = coeffs.a_matrix.iter().all(|&x| x < limit);
    Ok(TarantelloSeed {
        w,
        mu,
        a_matrix: coeffs.a_matrix,
        targets_met,
    })
}
