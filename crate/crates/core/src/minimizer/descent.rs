use serde::{Deserialize, Serialize};

use super::{dot, norm, tarantello_seed, Evaluation, FunctionalState, Problem, SolveError};
use crate::constraint::ConstraintError;
use crate::torus::{Field, FieldError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DescentConfig {
    /// Stop when `‖∇J‖_{L²} ≤ g_tol · |Ω|^{1/2}`.
    pub g_tol: f64,
    pub max_iter: usize,
    /// Trial points with an admissibility margin below this are rejected.
    pub m_min: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Smallest step before the line search gives up.
    pub min_step: f64,
    /// Relative size of `J` changes treated as round-off.
    pub noise: f64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig {
            g_tol: 1e-8,
            max_iter: 100_000,
            m_min: 0.0,
            armijo: 1e-4,
            min_step: 1e-14,
            noise: 1e-12,
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.g_tol > 0.0) {
            return Err(SolveError::Config("g_tol must be positive".into()));
        }
        if !(self.m_min >= 0.0) {
            return Err(SolveError::Config("m_min must be nonnegative".into()));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(SolveError::Config("armijo constant must lie in (0, 1)".into()));
        }
        if self.max_iter == 0 {
            return Err(SolveError::Config("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Seed {
    #[default]
    Zero,
    /// Per-index scalar solutions at coupling `mu_factor · λ₀(N_i)`.
    Tarantello { mu_factor: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub descent: DescentConfig,
    pub seed: Seed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum Termination {
    Converged,
    /// The line search was trapped at the admissibility boundary.
    LambdaTooSmall { margins: Vec<f64> },
    IterationCap,
    /// No acceptable step in the interior.
    Stalled,
}

#[derive(Clone, Debug, Serialize)]
pub struct IterRecord {
    pub j: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub state: FunctionalState,
    pub termination: Termination,
    pub iterations: usize,
    pub grad_norm: f64,
    /// `‖r‖_{L²}/(λ|Ω|^{1/2})` for the unreduced system.
    pub scaled_residual: f64,
    pub history: Vec<IterRecord>,
    /// The seed actually used, after any fallback.
    pub seed: Seed,
}

impl Solution {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    /// `v = w + c`
    pub fn v(&self) -> Vec<Field> {
        self.state.v()
    }
}

fn trial(w: &[Field], d: &[Field], step: f64) -> Vec<Field> {
    w.iter()
        .zip(d)
        .map(|(a, b)| {
            let mut x = a.clone();
            x.axpy(step, b);
            x.without_mean()
        })
        .collect()
}

/// Preconditioned descent with Barzilai–Borwein steps and Armijo backtracking.
pub fn minimize(problem: &Problem, config: &SolverConfig) -> Result<Solution, SolveError> {
    let cfg = &config.descent;
    cfg.validate()?;
    let lambda0 = problem.lambda0();
    if !(problem.lambda() > lambda0) {
        return Err(SolveError::NecessaryCondition {
            lambda: problem.lambda(),
            lambda0,
        });
    }

    let (mut state, seed) = initial_state(problem, config)?;
    let tol = cfg.g_tol * problem.area().sqrt();
    let mut g = problem.gradient(&state);
    let mut gn = norm(&g);
    let mut d = problem.descent_direction(&g);
    let mut alpha = 1.0;
    let mut history = vec![IterRecord {
        j: state.j,
        grad_norm: gn,
        step: 0.0,
    }];
    let mut termination = Termination::IterationCap;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        if gn <= tol {
            termination = Termination::Converged;
            break;
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            d = g.iter().map(|x| x.map(|v| -v)).collect();
            slope = -gn * gn;
        }
        let mut step = alpha;
        let mut boundary: Option<Vec<f64>> = None;
        let accepted = loop {
            match problem.evaluate(trial(&state.w, &d, step), cfg.m_min) {
                Ok(Evaluation::Interior(s)) => {
                    if s.j <= state.j + cfg.armijo * step * slope {
                        let gs = problem.gradient(&s);
                        break Some((s, gs));
                    }
                    if (s.j - state.j).abs() <= cfg.noise * state.j.abs().max(1.0) {
                        let gs = problem.gradient(&s);
                        if norm(&gs) < gn {
                            break Some((s, gs));
                        }
                    }
                }
                Ok(Evaluation::Boundary { margins }) => boundary = Some(margins),
                Err(SolveError::Field(FieldError::Range { .. })) => {}
                Err(SolveError::Constraint(ConstraintError::NonConvergence(_))) => {}
                Err(e) => return Err(e),
            }
            step *= 0.5;
            if step < cfg.min_step {
                break None;
            }
        };
        let Some((mut next, g_next)) = accepted else {
            termination = match boundary {
                Some(margins) => Termination::LambdaTooSmall { margins },
                None => Termination::Stalled,
            };
            break;
        };
        iterations += 1;
        next.iteration = iterations;

        let d_next = problem.descent_direction(&g_next);
        let s: Vec<Field> = d.iter().map(|x| x.map(|v| v * step)).collect();
        let y: Vec<Field> = g_next.iter().zip(&g).map(|(a, b)| a.zip_map(b, |p, q| p - q)).collect();
        let py: Vec<Field> = d.iter().zip(&d_next).map(|(a, b)| a.zip_map(b, |p, q| p - q)).collect();
        let sy = dot(&s, &y);
        let ypy = dot(&y, &py);
        alpha = if sy > 0.0 && ypy > 0.0 {
            (sy / ypy).clamp(1e-8, 1e8)
        } else {
            1.0
        };

        state = next;
        g = g_next;
        gn = norm(&g);
        d = d_next;
        history.push(IterRecord {
            j: state.j,
            grad_norm: gn,
            step,
        });
    }
    if termination == Termination::IterationCap && gn <= tol {
        termination = Termination::Converged;
    }

    let scaled_residual = problem.scaled_pde_residual(&state);
    Ok(Solution {
        state,
        termination,
        iterations,
        grad_norm: gn,
        scaled_residual,
        history,
        seed,
    })
}

fn initial_state(problem: &Problem, config: &SolverConfig) -> Result<(FunctionalState, Seed), SolveError> {
    let m_min = config.descent.m_min;
    if let Seed::Tarantello { mu_factor } = config.seed {
        if let Ok(seed) = tarantello_seed(problem, mu_factor, &config.descent) {
            if let Ok(Evaluation::Interior(s)) = problem.evaluate(seed.w, m_min) {
                return Ok((s, config.seed));
            }
        }
    }
    match problem.evaluate(problem.zero_w(), m_min)? {
        Evaluation::Interior(s) => Ok((s, Seed::Zero)),
        Evaluation::Boundary { margins } => Err(SolveError::InadmissibleSeed { margins }),
    }
}

/// Smallest `λ` in `[lo, hi]` (to relative width `rel_tol`) at which
/// [`minimize`] converges, assuming convergence is monotone in `λ`.
/// `None` if it fails at `hi`.
pub fn lambda_bisection(
    problem: &Problem,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    config: &SolverConfig,
) -> Result<Option<f64>, SolveError> {
    let works = |lambda: f64| -> Result<bool, SolveError> {
        let p = problem.with_lambda(lambda)?;
        match minimize(&p, config) {
            Ok(sol) => Ok(sol.converged()),
            Err(SolveError::NecessaryCondition { .. }) | Err(SolveError::InadmissibleSeed { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    };
    if !(lo > 0.0 && hi > lo) {
        return Err(SolveError::Config("bisection needs 0 < lo < hi".into()));
    }
    if !works(hi)? {
        return Ok(None);
    }
    if works(lo)? {
        return Ok(Some(lo));
    }
    let (mut a, mut b) = (lo, hi);
    while b / a > 1.0 + rel_tol {
        let mid = (a * b).sqrt();
        if works(mid)? {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(Some(b))
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;
    use crate::lie_cartan::Family;
    use std::f64::consts::PI;

    #[test]
    fn refuses_below_threshold() {
        let p = problem(Family::A, 1, 16, &[(0, 0.5, 0.5)], 1.0);
        assert!(matches!(
            minimize(&p, &SolverConfig::default()),
            Err(SolveError::NecessaryCondition { .. })
        ));
        let p = problem(Family::A, 3, 16, &[(0, 0.5, 0.5), (1, 0.2, 0.2), (2, 0.7, 0.3)], 0.5);
        assert!(matches!(
            minimize(&p, &SolverConfig::default()),
            Err(SolveError::NecessaryCondition { .. })
        ));
    }

    #[test]
    fn vortex_free_converges_immediately() {
        let p = problem(Family::A, 2, 16, &[], 3.0);
        let sol = minimize(&p, &SolverConfig::default()).unwrap();
        assert!(sol.converged());
        assert!(sol.iterations <= 1);
        assert!(sol.scaled_residual == 0.0 || sol.scaled_residual < 1e-15);
        for v in sol.v() {
            assert!(v.max_abs() < 1e-14);
        }
    }

    #[test]
    fn rank1_small_grid_converges_monotonically() {
        let p = problem(Family::A, 1, 32, &[(0, 0.5, 0.5)], 8.0);
        let sol = minimize(&p, &SolverConfig::default()).unwrap();
        assert!(sol.converged(), "{:?} after {} its, |g| = {}", sol.termination, sol.iterations, sol.grad_norm);
        assert!(sol.scaled_residual < 1e-6);
        // J never increases beyond round-off
        for w in sol.history.windows(2) {
            assert!(w[1].j <= w[0].j + 1e-11 * w[0].j.abs().max(1.0));
        }
        for w in &sol.state.w {
            assert!(w.is_mean_zero());
        }
        assert!(sol.state.constraint.within_box());
        // quantized integral 4πN/λ through the original variables
        let u = p.u_fields(&sol.state);
        let r = p.numeric().r[0];
        let k = 2.0;
        let integrand = u[0].map(|x| k * r * x - k * k * r * r * x * x);
        let target = 4.0 * PI / p.lambda();
        assert!((integrand.integral() - target).abs() < 1e-8 * target);
    }

    #[test]
    fn a3_small_grid_converges() {
        let p = problem(Family::A, 3, 32, &[(0, 0.25, 0.25), (1, 0.5, 0.75), (2, 0.75, 0.4)], 10.0);
        let sol = minimize(&p, &SolverConfig::default()).unwrap();
        assert!(sol.converged(), "{:?} |g| = {}", sol.termination, sol.grad_norm);
        assert!(sol.scaled_residual < 1e-6);
        let r15 = p.pde_residual(&sol.state);
        assert!(super::super::norm(&r15) / (p.lambda() * p.area().sqrt()) < 1e-6);
    }

    #[test]
    fn bisection_brackets() {
        let p = problem(Family::A, 1, 16, &[(0, 0.5, 0.5)], 30.0);
        let l0 = p.lambda0();
        let cfg = SolverConfig {
            descent: DescentConfig {
                g_tol: 1e-6,
                ..Default::default()
            },
            ..Default::default()
        };
        let found = lambda_bisection(&p, 0.5 * l0, 30.0 * l0, 0.05, &cfg).unwrap().unwrap();
        assert!(found > l0 && found <= 30.0 * l0);
    }
}
