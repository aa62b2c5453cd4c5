//! Constrained minimization of the reduced functional
//!
//! ```text
//! J(w) = ½ ∫ ∇w^τ A ∇w + (λ/2) Σ (R_i/P_i)(|Ω| − e^{c_i} a_i) + b^τ c − ½ 1^τ b
//! ```
//!
//! over mean-zero `w`, with `c = c(w)` resolved from the integral constraints.

mod descent;
mod seed;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::constraint::{
    self, admissible, ConstraintError, ConstraintInput, ConstraintMethod, ConstraintSolution,
};
use crate::lie_cartan::{CartanData, CartanError, CartanNumeric};
use crate::torus::{
    background, coefficients_from_exp, exp_fields, BackgroundField, Field, FieldError,
    IntegralCoefficients, Spectral, VortexConfiguration, EXPONENT_LIMIT,
};

pub use descent::{
    lambda_bisection, minimize, DescentConfig, Seed, Solution, SolverConfig, Termination,
};
pub use seed::{tarantello_seed, TarantelloSeed};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("necessary condition violated: lambda = {lambda} <= lambda0 = {lambda0}")]
    NecessaryCondition { lambda: f64, lambda0: f64 },
    #[error("seed is not admissible (margins {margins:?})")]
    InadmissibleSeed { margins: Vec<f64> },
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Cartan(#[from] CartanError),
    #[error("seed construction failed: {0}")]
    Seed(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// A fully specified instance: algebra, grid, vortices, and coupling.
#[derive(Clone, Debug)]
pub struct Problem {
    cartan: CartanData,
    numeric: CartanNumeric,
    spectral: Spectral,
    background: BackgroundField,
    b: DVector<f64>,
    lambda: f64,
    method: ConstraintMethod,
    precond: Preconditioner,
}

impl Problem {
    pub fn new(
        cartan: CartanData,
        spectral: Spectral,
        vortices: &VortexConfiguration,
        sigma: f64,
        lambda: f64,
    ) -> Result<Self, SolveError> {
        if vortices.rank() != cartan.rank() {
            return Err(SolveError::Config(format!(
                "vortex configuration has rank {}, algebra has rank {}",
                vortices.rank(),
                cartan.rank()
            )));
        }
        let bg = background(&spectral, vortices, sigma)?;
        Self::from_background(cartan, spectral, bg, lambda)
    }

    pub fn from_background(
        cartan: CartanData,
        spectral: Spectral,
        background: BackgroundField,
        lambda: f64,
    ) -> Result<Self, SolveError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(SolveError::Config(format!("lambda must be positive, got {lambda}")));
        }
        if background.rank() != cartan.rank() || background.grid() != spectral.grid() {
            return Err(SolveError::Config("background does not match problem".into()));
        }
        let numeric = cartan.numeric();
        let b = DVector::from_iterator(
            cartan.rank(),
            cartan.vortex_vector_b(background.counts()).iter().map(|x| x.value()),
        );
        let precond = Preconditioner::new(&numeric, lambda);
        Ok(Problem {
            cartan,
            numeric,
            spectral,
            background,
            b,
            lambda,
            method: ConstraintMethod::Auto,
            precond,
        })
    }

    pub fn with_method(mut self, method: ConstraintMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self, SolveError> {
        Self::from_background(self.cartan.clone(), self.spectral.clone(), self.background.clone(), lambda)
            .map(|p| p.with_method(self.method))
    }

    pub fn cartan(&self) -> &CartanData {
        &self.cartan
    }
    pub fn numeric(&self) -> &CartanNumeric {
        &self.numeric
    }
    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }
    pub fn background(&self) -> &BackgroundField {
        &self.background
    }
    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn method(&self) -> ConstraintMethod {
        self.method
    }
    pub fn rank(&self) -> usize {
        self.cartan.rank()
    }
    pub fn area(&self) -> f64 {
        self.spectral.grid().area()
    }
    pub fn counts(&self) -> &[u32] {
        self.background.counts()
    }
    pub fn lambda0(&self) -> f64 {
        self.cartan.lambda_threshold(self.counts(), self.area())
    }

    pub fn zero_w(&self) -> Vec<Field> {
        vec![Field::zeros(*self.spectral.grid()); self.rank()]
    }

    pub fn constraint_input(&self, coeffs: &IntegralCoefficients) -> Result<ConstraintInput<'_>, ConstraintError> {
        ConstraintInput::new(
            &self.numeric,
            coeffs.a.clone(),
            coeffs.a_matrix.clone(),
            self.b.clone(),
            self.lambda,
            self.area(),
        )
    }

    fn spectra(&self, f: &[Field]) -> Vec<Vec<Complex64>> {
        f.iter().map(|x| self.spectral.forward(x)).collect()
    }

    /// `½ Σ_ij A_ij ∫ ∇f_i·∇f_j` from precomputed spectra.
    fn kinetic_from_spectra(&self, spec: &[Vec<Complex64>]) -> f64 {
        let grid = self.spectral.grid();
        let scale = grid.area() / (grid.len() as f64).powi(2);
        let k2 = self.spectral.k2();
        let n = self.rank();
        let mut total = 0.0;
        for i in 0..n {
            for j in i..n {
                let aij = self.numeric.a[(i, j)];
                if aij == 0.0 {
                    continue;
                }
                let dot: f64 = spec[i]
                    .iter()
                    .zip(&spec[j])
                    .zip(k2)
                    .map(|((x, y), &k)| k * (x * y.conj()).re)
                    .sum();
                total += if i == j { 0.5 } else { 1.0 } * aij * dot * scale;
            }
        }
        total
    }

    pub fn kinetic(&self, f: &[Field]) -> f64 {
        self.kinetic_from_spectra(&self.spectra(f))
    }

    /// `I(v)` by quadrature.
    pub fn functional_i(&self, v: &[Field]) -> Result<f64, SolveError> {
        let u = exp_fields(&self.background, v)?;
        let n = self.rank();
        let grid = *self.spectral.grid();
        let mut potential = 0.0;
        for p in 0..grid.len() {
            let d = DVector::from_fn(n, |i, _| u[i][p] - 1.0);
            potential += d.dot(&(&self.numeric.q * &d));
        }
        potential *= grid.cell_area();
        let linear: f64 = (0..n).map(|i| self.b[i] * v[i].mean()).sum();
        Ok(self.kinetic(v) + 0.5 * self.lambda * potential + linear)
    }

    /// Evaluate `J(w)`, or report the admissibility boundary.
    pub fn evaluate(&self, w: Vec<Field>, m_min: f64) -> Result<Evaluation, SolveError> {
        let exp = exp_fields(&self.background, &w)?;
        let coefficients = coefficients_from_exp(&exp);
        let input = self.constraint_input(&coefficients)?;
        let margins = admissible(&input);
        if margins.iter().any(|&m| m < m_min || m.is_nan()) {
            return Ok(Evaluation::Boundary { margins });
        }
        let sol = constraint::solve(&input, self.method)?;
        let spectra = self.spectra(&w);
        let kinetic = self.kinetic_from_spectra(&spectra);
        let area = self.area();
        let d = &self.numeric;
        let mut j = kinetic;
        for i in 0..self.rank() {
            j += 0.5 * self.lambda * d.r[i] / d.p[i] * (area - sol.t[i] * coefficients.a[i]);
            j += self.b[i] * (sol.c[i] - 0.5);
        }
        Ok(Evaluation::Interior(FunctionalState {
            w,
            exp,
            coefficients,
            constraint: sol,
            j,
            margins,
            iteration: 0,
            spectra,
        }))
    }

    /// `U_i = e^{c_i} e^{u⁰_i + w_i}` pointwise.
    pub fn u_fields(&self, state: &FunctionalState) -> Vec<Field> {
        state
            .exp
            .iter()
            .zip(state.constraint.t.iter())
            .map(|(e, &t)| e.map(|x| t * x))
            .collect()
    }

    /// `λ [U Q (U − 1)]_i` pointwise.
    fn nonlinear_term(&self, u: &[Field]) -> Vec<Field> {
        let n = self.rank();
        let grid = *self.spectral.grid();
        let mut out = vec![Field::zeros(grid); n];
        for p in 0..grid.len() {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += self.numeric.q[(i, j)] * (u[j][p] - 1.0);
                }
                out[i][p] = self.lambda * u[i][p] * acc;
            }
        }
        out
    }

    /// `−Σ_j A_ij Δ w_j` from spectra.
    fn elliptic_term(&self, spec: &[Vec<Complex64>]) -> Vec<Field> {
        let n = self.rank();
        let k2 = self.spectral.k2();
        (0..n)
            .map(|i| {
                let mut acc = vec![Complex64::new(0.0, 0.0); k2.len()];
                for j in 0..n {
                    let aij = self.numeric.a[(i, j)];
                    if aij == 0.0 {
                        continue;
                    }
                    for ((o, x), &k) in acc.iter_mut().zip(&spec[j]).zip(k2) {
                        *o += x * (aij * k);
                    }
                }
                self.spectral.inverse(acc)
            })
            .collect()
    }

    /// L² gradient of `J`: mean-zero projection of the Euler–Lagrange expression of `I` at `w + c(w)`.
    pub fn gradient(&self, state: &FunctionalState) -> Vec<Field> {
        let u = self.u_fields(state);
        let nl = self.nonlinear_term(&u);
        let el = self.elliptic_term(&state.spectra);
        el.into_iter()
            .zip(nl)
            .map(|(mut g, x)| {
                g.axpy(1.0, &x);
                g.subtract_mean();
                g
            })
            .collect()
    }

    /// Preconditioned descent direction `−(A|k|² + λQ)^{-1} g`.
    pub fn descent_direction(&self, g: &[Field]) -> Vec<Field> {
        self.precond.apply(&self.spectral, g)
    }

    /// Pointwise residual of `Δv = λ K̃ U K̃ (U − 1) + 4πN/|Ω|`.
    pub fn pde_residual(&self, state: &FunctionalState) -> Vec<Field> {
        let n = self.rank();
        let grid = *self.spectral.grid();
        let u = self.u_fields(state);
        let kt = &self.numeric.k_tilde;
        let four_pi = 4.0 * std::f64::consts::PI;
        let mut out: Vec<Field> = state.w.iter().map(|w| self.spectral.laplacian(w)).collect();
        for p in 0..grid.len() {
            let um1 = DVector::from_fn(n, |j, _| u[j][p] - 1.0);
            let inner = kt * um1;
            let scaled = DVector::from_fn(n, |j, _| u[j][p] * inner[j]);
            let rhs = kt * scaled;
            for i in 0..n {
                out[i][p] -= self.lambda * rhs[i] + four_pi * self.counts()[i] as f64 / grid.area();
            }
        }
        out
    }

    /// Pointwise residual of `Δ A v = λ U Q (U − 1) + b/|Ω|`.
    pub fn multiplied_residual(&self, state: &FunctionalState) -> Vec<Field> {
        let u = self.u_fields(state);
        let nl = self.nonlinear_term(&u);
        let el = self.elliptic_term(&state.spectra);
        let area = self.area();
        el.into_iter()
            .zip(nl)
            .enumerate()
            .map(|(i, (e, x))| e.zip_map(&x, |a, b| -a - b - self.b[i] / area))
            .collect()
    }

    /// `‖r‖_{L²} / (λ |Ω|^{1/2})` for the residual of the unreduced system.
    pub fn scaled_pde_residual(&self, state: &FunctionalState) -> f64 {
        norm(&self.pde_residual(state)) / (self.lambda * self.area().sqrt())
    }

    /// Largest exponent `|u⁰ + w|` of a state, for range monitoring.
    pub fn exponent_headroom(&self, w: &[Field]) -> f64 {
        let worst = self
            .background
            .u0()
            .iter()
            .zip(w)
            .map(|(a, b)| a.zip_map(b, |x, y| x + y).max_abs())
            .fold(0.0, f64::max);
        EXPONENT_LIMIT - worst
    }
}

/// Result of [`Problem::evaluate`].
#[derive(Clone, Debug)]
pub enum Evaluation {
    Interior(FunctionalState),
    /// Some margin fell to or below the safety level.
    Boundary { margins: Vec<f64> },
}

impl Evaluation {
    pub fn interior(self) -> Option<FunctionalState> {
        match self {
            Evaluation::Interior(s) => Some(s),
            Evaluation::Boundary { .. } => None,
        }
    }
}

/// `J` at one admissible `w`, with everything needed for its gradient.
#[derive(Clone, Debug)]
pub struct FunctionalState {
    pub w: Vec<Field>,
    /// `e^{u⁰_i + w_i}`
    pub exp: Vec<Field>,
    pub coefficients: IntegralCoefficients,
    pub constraint: ConstraintSolution,
    pub j: f64,
    pub margins: Vec<f64>,
    pub iteration: usize,
    spectra: Vec<Vec<Complex64>>,
}

impl FunctionalState {
    pub fn c(&self) -> &DVector<f64> {
        &self.constraint.c
    }

    /// `v = w + c`
    pub fn v(&self) -> Vec<Field> {
        self.w
            .iter()
            .zip(self.constraint.c.iter())
            .map(|(w, &c)| w.map(|x| x + c))
            .collect()
    }
}

/// Sum of component inner products.
pub fn dot(a: &[Field], b: &[Field]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

pub fn norm(a: &[Field]) -> f64 {
    dot(a, a).sqrt()
}

/// Per-mode inverse of `A|k|² + λQ` via `VᵀAV = I`, `VᵀQV = diag(γ)`.
#[derive(Clone, Debug)]
struct Preconditioner {
    v: DMatrix<f64>,
    shifted: DVector<f64>,
}

impl Preconditioner {
    fn new(d: &CartanNumeric, lambda: f64) -> Self {
        let l = d.a.clone().cholesky().expect("A is positive definite").unpack();
        let l_inv = l.clone().try_inverse().expect("triangular factor is invertible");
        let c = &l_inv * &d.q * l_inv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let eig = c.symmetric_eigen();
        let v = l_inv.transpose() * eig.eigenvectors;
        Preconditioner {
            v,
            shifted: eig.eigenvalues * lambda,
        }
    }

    fn apply(&self, spectral: &Spectral, g: &[Field]) -> Vec<Field> {
        let n = g.len();
        let spec: Vec<Vec<Complex64>> = g.iter().map(|x| spectral.forward(x)).collect();
        let k2 = spectral.k2();
        let mut out = vec![vec![Complex64::new(0.0, 0.0); k2.len()]; n];
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for (p, &k) in k2.iter().enumerate() {
            if k == 0.0 {
                continue;
            }
            for (m, ym) in y.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    acc += spec[i][p] * self.v[(i, m)];
                }
                *ym = acc / (k + self.shifted[m]);
            }
            for i in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (m, ym) in y.iter().enumerate() {
                    acc += ym * self.v[(i, m)];
                }
                out[i][p] = -acc;
            }
        }
        out.into_iter()
            .map(|s| spectral.inverse(s).without_mean())
            .collect()
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::lie_cartan::{AlgebraSpec, Family};
    use crate::torus::{default_sigma, TorusGrid};

    pub fn problem(family: Family, rank: usize, m: usize, points: &[(usize, f64, f64)], factor: f64) -> Problem {
        let cartan = CartanData::from_spec(&AlgebraSpec::simple(family, rank)).unwrap();
        let grid = TorusGrid::unit_square(m).unwrap();
        let mut vc = VortexConfiguration::new(rank);
        for &(i, x, y) in points {
            vc.push(&grid, i, x, y, 1).unwrap();
        }
        let lambda0 = cartan.lambda_threshold(&vc.counts(), grid.area());
        let lambda = if lambda0 > 0.0 { factor * lambda0 } else { factor };
        Problem::new(cartan, Spectral::new(grid), &vc, default_sigma(&grid), lambda).unwrap()
    }

    /// Smooth random mean-zero fields.
    pub fn smooth_random(p: &Problem, seed: u64, amp: f64) -> Vec<Field> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let grid = *p.spectral().grid();
        (0..p.rank())
            .map(|_| {
                let modes: Vec<(f64, f64, f64, f64)> = (0..4)
                    .map(|_| {
                        (
                            rng.gen_range(1..4) as f64,
                            rng.gen_range(0..4) as f64,
                            rng.gen_range(-amp..amp),
                            rng.gen_range(0.0..std::f64::consts::TAU),
                        )
                    })
                    .collect();
                Field::from_fn(grid, |x, y| {
                    modes
                        .iter()
                        .map(|&(k1, k2, a, ph)| {
                            a * (std::f64::consts::TAU * (k1 * x / grid.l1() + k2 * y / grid.l2()) + ph).cos()
                        })
                        .sum()
                })
                .without_mean()
            })
            .collect()
    }
}
