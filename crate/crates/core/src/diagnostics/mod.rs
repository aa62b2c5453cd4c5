//! Checks of solver output against the structural conclusions: threshold,
//! quantized integrals, the aggregate identities, and large-coupling decay.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::lie_cartan::CartanData;
use crate::minimizer::{minimize, FunctionalState, Problem, Solution, SolverConfig, Termination};
use crate::torus::Field;

/// Tolerances against which a [`SolveReport`] is graded.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub quantized: f64,
    pub identity: f64,
    pub pde_residual: f64,
    pub constraint: f64,
    /// Fraction of `R_i²|Ω|` that `d_i` must fall below at the top of a sweep.
    pub asymptotic: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            quantized: 1e-4,
            identity: 1e-8,
            pde_residual: 1e-6,
            constraint: 1e-10,
            asymptotic: 1e-2,
        }
    }
}

/// A measured value next to its target and the tolerance it was graded with.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Graded {
    pub value: f64,
    pub target: f64,
    /// Relative error, or absolute when the target is zero.
    pub error: f64,
    pub tol: f64,
    pub passed: bool,
}

impl Graded {
    pub fn new(value: f64, target: f64, tol: f64) -> Self {
        let error = if target != 0.0 {
            (value - target).abs() / target.abs()
        } else {
            value.abs()
        };
        Graded {
            value,
            target,
            error,
            tol,
            passed: error <= tol,
        }
    }

    /// `value ≤ tol` with no target.
    pub fn bound(value: f64, tol: f64) -> Self {
        Graded {
            value,
            target: 0.0,
            error: value,
            tol,
            passed: value <= tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NecessaryCheck {
    pub lambda: f64,
    pub lambda0: f64,
    pub passed: bool,
}

/// `λ > λ₀` strictly.
pub fn check_necessary(lambda: f64, data: &CartanData, counts: &[u32], area: f64) -> NecessaryCheck {
    let lambda0 = data.lambda_threshold(counts, area);
    NecessaryCheck {
        lambda,
        lambda0,
        passed: lambda > lambda0,
    }
}

/// `e^{u_i}` in the original variables: `R_i U_i`.
pub fn original_exponentials(problem: &Problem, state: &FunctionalState) -> Vec<Field> {
    problem
        .u_fields(state)
        .into_iter()
        .zip(problem.numeric().r.iter())
        .map(|(u, &r)| u.map(|x| r * x))
        .collect()
}

/// `∫ (Σ_j K_ji e^{u_j} − Σ_jk K_kj K_ji e^{u_j} e^{u_k})` per index, against `4πN_i/λ`.
pub fn quantized_integrals(problem: &Problem, state: &FunctionalState, tol: f64) -> Vec<Graded> {
    let e = original_exponentials(problem, state);
    let k = &problem.numeric().k;
    let n = problem.rank();
    let grid = *problem.spectral().grid();
    let mut acc = vec![0.0; n];
    let mut inner = vec![0.0; n];
    for p in 0..grid.len() {
        for (j, ij) in inner.iter_mut().enumerate() {
            *ij = (0..n).map(|kk| k[(kk, j)] * e[kk][p]).sum();
        }
        for (i, a) in acc.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in 0..n {
                s += k[(j, i)] * e[j][p] * (1.0 - inner[j]);
            }
            *a += s;
        }
    }
    let four_pi = 4.0 * std::f64::consts::PI;
    acc.into_iter()
        .enumerate()
        .map(|(i, a)| {
            Graded::new(
                a * grid.cell_area(),
                four_pi * problem.counts()[i] as f64 / problem.lambda(),
                tol,
            )
        })
        .collect()
}

/// `(1/λ) ∫ (4πN_i/|Ω| − Δv_i + r_i)`, the integrated discrete form of the PDE.
pub fn integrated_pde_form(problem: &Problem, state: &FunctionalState) -> Vec<f64> {
    let r = problem.pde_residual(state);
    let sp = problem.spectral();
    let four_pi = 4.0 * std::f64::consts::PI;
    state
        .w
        .iter()
        .zip(r)
        .enumerate()
        .map(|(i, (w, ri))| {
            let lap = sp.laplacian(w).integral();
            (four_pi * problem.counts()[i] as f64 - lap + ri.integral()) / problem.lambda()
        })
        .collect()
}

/// `d_i = ∫ (e^{u_i} − R_i)²` in the original variables.
pub fn asymptotic_distances(problem: &Problem, state: &FunctionalState) -> Vec<f64> {
    original_exponentials(problem, state)
        .iter()
        .zip(problem.numeric().r.iter())
        .map(|(e, &r)| {
            let d = e.map(|x| x - r);
            d.dot(&d)
        })
        .collect()
}

/// `1^τ (∫ U Q (U − 1) + b/λ)`, relative to `1^τ b/λ` (absolute without vortices).
pub fn summed_constraint_residual(problem: &Problem, state: &FunctionalState) -> f64 {
    let u = problem.u_fields(state);
    let q = &problem.numeric().q;
    let n = problem.rank();
    let grid = *problem.spectral().grid();
    let mut total = 0.0;
    for p in 0..grid.len() {
        for i in 0..n {
            for j in 0..n {
                total += u[i][p] * q[(i, j)] * (u[j][p] - 1.0);
            }
        }
    }
    total *= grid.cell_area();
    let bsum = problem.b().sum() / problem.lambda();
    let r = total + bsum;
    if bsum > 0.0 {
        r.abs() / bsum
    } else {
        r.abs()
    }
}

/// Both sides of `∫(U−½)^τQ(U−½) = (|Ω|/4) 1^τP⁻¹(K^τ)⁻¹1 − (4π/λ) 1^τP⁻¹(K^τ)⁻¹N`.
pub fn quadratic_identity(problem: &Problem, state: &FunctionalState, tol: f64) -> Graded {
    let u = problem.u_fields(state);
    let d = problem.numeric();
    let n = problem.rank();
    let grid = *problem.spectral().grid();
    let mut lhs = 0.0;
    for p in 0..grid.len() {
        for i in 0..n {
            for j in 0..n {
                lhs += (u[i][p] - 0.5) * d.q[(i, j)] * (u[j][p] - 0.5);
            }
        }
    }
    lhs *= grid.cell_area();
    let kt_inv = d.k.transpose().try_inverse().expect("Cartan matrix is invertible");
    let p_inv = DVector::from_iterator(n, d.p.iter().map(|x| 1.0 / x));
    let ones = DVector::from_element(n, 1.0);
    let nvec = DVector::from_iterator(n, problem.counts().iter().map(|&x| x as f64));
    let rhs = problem.area() / 4.0 * p_inv.dot(&(&kt_inv * &ones))
        - 4.0 * std::f64::consts::PI / problem.lambda() * p_inv.dot(&(&kt_inv * nvec));
    Graded::new(lhs, rhs, tol)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InterpolationCheck {
    pub index: usize,
    pub s: f64,
    /// `ln ∫ e^{u⁰_i + w_i}`
    pub log_lhs: f64,
    /// Logarithm of the right-hand bound; `+∞` when `b_i = 0`.
    pub log_rhs: f64,
    pub margin: f64,
    pub passed: bool,
}

/// `∫e^{u⁰+w} ≤ (λ/(4P²bα))^{(1−s)/s} (∫e^{s(u⁰+w)})^{1/s}` for index `i`, in log form.
pub fn interpolation_check(problem: &Problem, w: &[Field], s: f64, index: usize) -> InterpolationCheck {
    assert!(s > 0.0 && s <= 1.0, "s must lie in (0, 1]");
    let d = problem.numeric();
    let g = problem.background().u0()[index].zip_map(&w[index], |a, b| a + b);
    let log_lhs = g.map(f64::exp).integral().ln();
    let b = problem.b()[index];
    let log_rhs = if b > 0.0 {
        let base = problem.lambda() / (4.0 * d.p[index] * d.p[index] * b * d.alpha[(index, index)]);
        (1.0 - s) / s * base.ln() + g.map(|x| (s * x).exp()).integral().ln() / s
    } else {
        f64::INFINITY
    };
    let margin = log_rhs - log_lhs;
    InterpolationCheck {
        index,
        s,
        log_lhs,
        log_rhs,
        margin,
        passed: margin >= -1e-12 * log_lhs.abs().max(1.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub lambda: f64,
    pub necessary: NecessaryCheck,
    pub termination: Termination,
    pub converged: bool,
    pub iterations: usize,
    pub functional_j: f64,
    pub c: Vec<f64>,
    pub t: Vec<f64>,
    pub grad_norm: f64,
    pub pde_residual: Graded,
    pub quantized: Vec<Graded>,
    pub integrated_pde_form: Vec<f64>,
    pub asymptotic_distance: Vec<f64>,
    pub constraint_residual: Graded,
    pub box_margin: f64,
    pub within_box: bool,
    pub admissibility_margins: Vec<f64>,
    pub summed_constraint: Graded,
    pub quadratic_identity: Graded,
    /// Smallest eigenvalue of `A`.
    pub alpha0: f64,
    /// Smallest eigenvalue of `Q`.
    pub beta0: f64,
}

impl SolveReport {
    pub fn build(problem: &Problem, solution: &Solution, tol: &Tolerances) -> Self {
        let st = &solution.state;
        let d = problem.numeric();
        let min_eig = |m: &nalgebra::DMatrix<f64>| m.clone().symmetric_eigen().eigenvalues.min();
        SolveReport {
            lambda: problem.lambda(),
            necessary: check_necessary(problem.lambda(), problem.cartan(), problem.counts(), problem.area()),
            termination: solution.termination.clone(),
            converged: solution.converged(),
            iterations: solution.iterations,
            functional_j: st.j,
            c: st.c().iter().copied().collect(),
            t: st.constraint.t.iter().copied().collect(),
            grad_norm: solution.grad_norm,
            pde_residual: Graded::bound(solution.scaled_residual, tol.pde_residual),
            quantized: quantized_integrals(problem, st, tol.quantized),
            integrated_pde_form: integrated_pde_form(problem, st),
            asymptotic_distance: asymptotic_distances(problem, st),
            constraint_residual: Graded::bound(st.constraint.residual, tol.constraint),
            box_margin: st.constraint.box_margin,
            within_box: st.constraint.within_box(),
            admissibility_margins: st.margins.clone(),
            summed_constraint: Graded::bound(summed_constraint_residual(problem, st), tol.identity),
            quadratic_identity: quadratic_identity(problem, st, tol.identity),
            alpha0: min_eig(&d.a),
            beta0: min_eig(&d.q),
        }
    }

    /// Converged and every graded entry passed.
    pub fn all_passed(&self) -> bool {
        self.converged
            && self.necessary.passed
            && self.pde_residual.passed
            && self.quantized.iter().all(|g| g.passed)
            && self.constraint_residual.passed
            && self.within_box
            && self.summed_constraint.passed
            && self.quadratic_identity.passed
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub converged: bool,
    pub termination: Option<Termination>,
    pub functional_j: Option<f64>,
    pub asymptotic_distance: Vec<f64>,
    pub quantized_error: Vec<f64>,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sweep {
    pub points: Vec<SweepPoint>,
    /// Per index: `d_i` strictly decreasing over the converged points.
    pub decreasing: Vec<bool>,
    /// Per index: `d_i < tol · R_i² |Ω|` at the largest converged `λ`.
    pub below_threshold: Vec<bool>,
}

/// Solve at every `λ` concurrently; results ordered by increasing `λ`.
pub fn asymptotic_sweep(problem: &Problem, lambdas: &[f64], config: &SolverConfig, tol: &Tolerances) -> Sweep {
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = problem.rank();
    let points: Vec<SweepPoint> = sorted
        .par_iter()
        .map(|&lambda| {
            let run = problem.with_lambda(lambda).and_then(|p| minimize(&p, config).map(|s| (p, s)));
            match run {
                Ok((p, s)) => {
                    let q = quantized_integrals(&p, &s.state, tol.quantized);
                    SweepPoint {
                        lambda,
                        converged: s.converged(),
                        termination: Some(s.termination.clone()),
                        functional_j: Some(s.state.j),
                        asymptotic_distance: asymptotic_distances(&p, &s.state),
                        quantized_error: q.iter().map(|g| g.error).collect(),
                        iterations: s.iterations,
                        error: None,
                    }
                }
                Err(e) => SweepPoint {
                    lambda,
                    converged: false,
                    termination: None,
                    functional_j: None,
                    asymptotic_distance: Vec::new(),
                    quantized_error: Vec::new(),
                    iterations: 0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let good: Vec<&SweepPoint> = points.iter().filter(|p| p.converged).collect();
    let decreasing = (0..n)
        .map(|i| good.windows(2).all(|w| w[1].asymptotic_distance[i] < w[0].asymptotic_distance[i]))
        .collect();
    let below_threshold = (0..n)
        .map(|i| match good.last() {
            Some(top) => {
                let r = problem.numeric().r[i];
                top.asymptotic_distance[i] < tol.asymptotic * r * r * problem.area()
            }
            None => false,
        })
        .collect();
    Sweep {
        points,
        decreasing,
        below_threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie_cartan::{AlgebraSpec, Family};
    use crate::minimizer::Problem;
    use crate::torus::{default_sigma, Spectral, TorusGrid, VortexConfiguration};
    use std::f64::consts::PI;

    fn problem(rank: usize, m: usize, pts: &[(usize, f64, f64)], factor: f64) -> Problem {
        let cartan = CartanData::from_spec(&AlgebraSpec::simple(Family::A, rank)).unwrap();
        let grid = TorusGrid::unit_square(m).unwrap();
        let mut vc = VortexConfiguration::new(rank);
        for &(i, x, y) in pts {
            vc.push(&grid, i, x, y, 1).unwrap();
        }
        let l0 = cartan.lambda_threshold(&vc.counts(), 1.0);
        let lambda = if l0 > 0.0 { factor * l0 } else { factor };
        Problem::new(cartan, Spectral::new(grid), &vc, default_sigma(&grid), lambda).unwrap()
    }

    #[test]
    fn necessary_condition_examples() {
        let a1 = CartanData::from_spec(&AlgebraSpec::simple(Family::A, 1)).unwrap();
        let boundary = check_necessary(16.0 * PI, &a1, &[1], 1.0);
        assert!(!boundary.passed);
        assert!((boundary.lambda0 - 16.0 * PI).abs() < 1e-12);
        assert!(check_necessary(32.0 * PI, &a1, &[1], 1.0).passed);
        let none = check_necessary(1e-3, &a1, &[0], 1.0);
        assert!(none.passed && none.lambda0 == 0.0);
    }

    #[test]
    fn quantized_target_arithmetic() {
        let g = Graded::new(0.125_664, 4.0 * PI / 100.0, 1e-5);
        assert!((g.target - 0.125_664).abs() < 1e-6);
        assert!(g.passed);
    }

    #[test]
    fn vortex_free_report() {
        let p = problem(2, 16, &[], 5.0);
        let sol = minimize(&p, &SolverConfig::default()).unwrap();
        let rep = SolveReport::build(&p, &sol, &Tolerances::default());
        assert!(rep.all_passed());
        assert!(rep.quantized.iter().all(|g| g.value.abs() < 1e-14));
        assert!(rep.asymptotic_distance.iter().all(|&d| d < 1e-28));
    }

    #[test]
    fn converged_report_passes() {
        let p = problem(3, 32, &[(0, 0.2, 0.2), (1, 0.5, 0.7), (2, 0.8, 0.4)], 10.0);
        let sol = minimize(&p, &SolverConfig::default()).unwrap();
        let rep = SolveReport::build(&p, &sol, &Tolerances::default());
        assert!(rep.all_passed(), "{rep:#?}");
        // discrete integrated form agrees with the quantized integrals
        for (q, f) in rep.quantized.iter().zip(&rep.integrated_pde_form) {
            assert!((q.value - f).abs() <= 1e-10 * q.target.max(1e-300) + 1e-14);
        }
        assert!(rep.alpha0 > 0.0 && rep.beta0 > 0.0);
    }

    #[test]
    fn interpolation_closed_form() {
        let p = problem(1, 16, &[], 5.0);
        // u⁰ = 0 here but b = 0; build a vortex problem and zero field instead
        let c = interpolation_check(&p, &p.zero_w(), 0.5, 0);
        assert!(c.passed && c.log_rhs.is_infinite());

        let p = problem(1, 16, &[(0, 0.5, 0.5)], 4.0);
        let w = p.zero_w();
        let one = interpolation_check(&p, &w, 1.0, 0);
        assert!(one.margin.abs() < 1e-12);
        // with u⁰ replaced by zero: 1 ≤ (λ/(4P²bα))^{(1−s)/s}
        let d = p.numeric();
        let s = 0.5;
        let base = p.lambda() / (4.0 * d.p[0] * d.p[0] * p.b()[0] * d.alpha[(0, 0)]);
        assert!(base.powf((1.0 - s) / s) >= 1.0);
    }

    #[test]
    fn interpolation_holds_on_admissible_states() {
        let p = problem(2, 32, &[(0, 0.3, 0.3), (1, 0.6, 0.2)], 10.0);
        for seed in 0..10u64 {
            let grid = *p.spectral().grid();
            let w: Vec<Field> = (0..2)
                .map(|i| {
                    let a = 0.1 + 0.05 * (seed as f64) + 0.1 * i as f64;
                    Field::from_fn(grid, |x, y| a * (2.0 * PI * x).sin() * (2.0 * PI * (y + 0.1 * seed as f64)).cos())
                        .without_mean()
                })
                .collect();
            if p.evaluate(w.clone(), 0.0).unwrap().interior().is_none() {
                continue;
            }
            for i in 0..2 {
                assert!(interpolation_check(&p, &w, 0.5, i).passed);
            }
        }
    }

    #[test]
    fn sweep_is_ordered_and_decays() {
        let p = problem(1, 32, &[(0, 0.5, 0.5)], 4.0);
        let l0 = p.lambda0();
        let lambdas: Vec<f64> = [16.0, 4.0, 8.0].iter().map(|f| f * l0).collect();
        let sw = asymptotic_sweep(&p, &lambdas, &SolverConfig::default(), &Tolerances::default());
        let ls: Vec<f64> = sw.points.iter().map(|x| x.lambda).collect();
        assert!(ls.windows(2).all(|w| w[0] < w[1]));
        assert!(sw.points.iter().all(|x| x.converged));
        assert!(sw.decreasing[0]);
    }

    #[test]
    fn sweep_records_failures() {
        let p = problem(1, 16, &[(0, 0.5, 0.5)], 4.0);
        let l0 = p.lambda0();
        let sw = asymptotic_sweep(&p, &[0.5 * l0, 4.0 * l0], &SolverConfig::default(), &Tolerances::default());
        assert!(sw.points[0].error.is_some());
        assert!(sw.points[1].converged);
    }
}
