//! Resolution of the coupled quadratic constraints
//!
//! ```text
//! t_i² R_i² α_ii a_ii − t_i (R_i a_i / P_i + Σ_{j≠i} t_j R_i R_j α_ij a_ij) + b_i/λ = 0
//! ```
//!
//! for `t_i = e^{c_i}`, given the integral coefficients of a mean-zero `w`.

mod homotopy;
mod scalar;
mod squeeze;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::lie_cartan::CartanNumeric;

pub use homotopy::{picard_iterates, solve_homotopy, HomotopyOptions};
pub use scalar::scalar_closed_form;
pub use squeeze::{solve_squeeze, SqueezeMaps};

/// Fixed-point tolerance in sup-norm.
pub const FIXED_POINT_TOL: f64 = 1e-13;
/// Certified relative residual of the component equations.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Box constant `r₀ > 1`.
pub const BOX_RADIUS: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintError {
    #[error("input is not admissible (margins {margins:?})")]
    Inadmissible { margins: Vec<f64> },
    #[error("negative discriminant {discriminant} in equation {index}")]
    Infeasible { index: usize, discriminant: f64 },
    #[error("Q-tilde is not positive definite")]
    QTildeIndefinite,
    #[error("squeeze method needs the A3 Cartan matrix")]
    NotSu4,
    #[error("closed form needs rank 1, got rank {0}")]
    NotScalar(usize),
    #[error("no sign change of F on [0, {0}]")]
    NoSignChange(f64),
    #[error("constraint solve did not converge: {0}")]
    NonConvergence(String),
    #[error("malformed input: {0}")]
    Malformed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Squeeze,
    Homotopy,
    ScalarClosedForm,
}

/// Strategy selection for [`solve`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMethod {
    /// Closed form at rank 1, homotopy otherwise.
    #[default]
    Auto,
    Homotopy,
    Squeeze,
}

/// Everything the constraint equations depend on.
#[derive(Clone, Debug)]
pub struct ConstraintInput<'a> {
    pub data: &'a CartanNumeric,
    pub a: DVector<f64>,
    pub a_matrix: DMatrix<f64>,
    pub b: DVector<f64>,
    pub lambda: f64,
    /// `|Ω|`, used for the a-priori box `a_i t_i ≤ |Ω|`.
    pub area: f64,
}

impl<'a> ConstraintInput<'a> {
    pub fn new(
        data: &'a CartanNumeric,
        a: DVector<f64>,
        a_matrix: DMatrix<f64>,
        b: DVector<f64>,
        lambda: f64,
        area: f64,
    ) -> Result<Self, ConstraintError> {
        let n = data.n;
        if a.len() != n || a_matrix.nrows() != n || a_matrix.ncols() != n || b.len() != n {
            return Err(ConstraintError::Malformed(format!("dimensions do not match rank {n}")));
        }
        if !(lambda > 0.0) || !(area > 0.0) {
            return Err(ConstraintError::Malformed("lambda and area must be positive".into()));
        }
        if a.iter().any(|&x| !(x > 0.0)) || a_matrix.iter().any(|&x| !(x > 0.0)) {
            return Err(ConstraintError::Malformed("coefficients must be positive".into()));
        }
        for i in 0..n {
            for j in 0..i {
                let (x, y) = (a_matrix[(i, j)], a_matrix[(j, i)]);
                if (x - y).abs() > 1e-12 * x.abs().max(y.abs()) {
                    return Err(ConstraintError::Malformed("a_matrix is not symmetric".into()));
                }
            }
        }
        if b.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(ConstraintError::Malformed("b must be nonnegative".into()));
        }
        Ok(ConstraintInput {
            data,
            a,
            a_matrix,
            b,
            lambda,
            area,
        })
    }

    pub fn rank(&self) -> usize {
        self.data.n
    }

    /// `D_i = R_i² α_ii a_ii`
    fn diag_coeff(&self, i: usize) -> f64 {
        let d = self.data;
        d.r[i] * d.r[i] * d.alpha[(i, i)] * self.a_matrix[(i, i)]
    }

    /// `B_i(t) = R_i a_i / P_i + Σ_{j≠i} t_j R_i R_j α_ij a_ij`
    fn linear_coeff(&self, i: usize, t: &DVector<f64>) -> f64 {
        let d = self.data;
        let mut acc = d.r[i] * self.a[i] / d.p[i];
        for j in 0..self.rank() {
            if j != i {
                acc += t[j] * d.r[i] * d.r[j] * d.alpha[(i, j)] * self.a_matrix[(i, j)];
            }
        }
        acc
    }

    /// Lower bound `a_i / (2 P_i R_i α_ii a_ii)` on every solution.
    pub fn floor(&self) -> DVector<f64> {
        let d = self.data;
        DVector::from_fn(self.rank(), |i, _| {
            self.a[i] / (2.0 * d.p[i] * d.r[i] * d.alpha[(i, i)] * self.a_matrix[(i, i)])
        })
    }
}

/// `Q̃ = R S̃ R` with `S̃_ii = α_ii a_ii`, `S̃_ij = −α_ij a_ij`.
pub fn q_tilde(input: &ConstraintInput) -> DMatrix<f64> {
    let d = input.data;
    let n = input.rank();
    DMatrix::from_fn(n, n, |i, j| {
        let sign = if i == j { 1.0 } else { -1.0 };
        d.r[i] * sign * d.alpha[(i, j)] * input.a_matrix[(i, j)] * d.r[j]
    })
}

/// Margins `a_i²/a_ii − 4 α_ii P_i² b_i / λ`; admissible iff all are `≥ 0`.
pub fn admissible(input: &ConstraintInput) -> Vec<f64> {
    let d = input.data;
    (0..input.rank())
        .map(|i| {
            input.a[i] * input.a[i] / input.a_matrix[(i, i)]
                - 4.0 * d.alpha[(i, i)] * d.p[i] * d.p[i] * input.b[i] / input.lambda
        })
        .collect()
}

pub fn is_admissible(margins: &[f64]) -> bool {
    margins.iter().all(|&m| m >= 0.0)
}

/// The deformed map `f(ε, t)`, "+" branch.
pub fn f_map(
    input: &ConstraintInput,
    eps: f64,
    t: &DVector<f64>,
) -> Result<DVector<f64>, ConstraintError> {
    let n = input.rank();
    let mut out = DVector::zeros(n);
    for i in 0..n {
        let dcoef = input.diag_coeff(i);
        let bcoef = input.linear_coeff(i, t);
        let disc = bcoef * bcoef - 4.0 * eps * input.b[i] * dcoef / input.lambda;
        if disc < 0.0 {
            return Err(ConstraintError::Infeasible {
                index: i,
                discriminant: disc,
            });
        }
        out[i] = (bcoef + disc.sqrt()) / (2.0 * dcoef);
    }
    Ok(out)
}

/// Jacobian `∂f(1, t)/∂t`.
pub(crate) fn f_jacobian(input: &ConstraintInput, t: &DVector<f64>, eps: f64) -> DMatrix<f64> {
    let d = input.data;
    let n = input.rank();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            return 0.0;
        }
        let dcoef = input.diag_coeff(i);
        let bcoef = input.linear_coeff(i, t);
        let disc = (bcoef * bcoef - 4.0 * eps * input.b[i] * dcoef / input.lambda).max(1e-300);
        let coupling = d.r[i] * d.r[j] * d.alpha[(i, j)] * input.a_matrix[(i, j)];
        coupling / (2.0 * dcoef) * (1.0 + bcoef / disc.sqrt())
    })
}

/// Per-component relative residual of the quadratic constraints.
pub fn residuals(input: &ConstraintInput, t: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(input.rank(), |i, _| {
        let quad = t[i] * t[i] * input.diag_coeff(i);
        let lin = t[i] * input.linear_coeff(i, t);
        let cst = input.b[i] / input.lambda;
        let scale = quad.abs().max(lin.abs()).max(cst.abs()).max(1.0);
        (quad - lin + cst) / scale
    })
}

/// A resolved constraint: `t = e^c`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintSolution {
    pub t: DVector<f64>,
    pub c: DVector<f64>,
    /// `max_i` relative residual of the component equations.
    pub residual: f64,
    pub method: Method,
    pub iterations: usize,
    /// `min_i min(1 − t_i, |Ω| − a_i t_i)` relative to `|Ω|`; `≥ 0` inside the box.
    pub box_margin: f64,
}

impl ConstraintSolution {
    pub(crate) fn finish(
        input: &ConstraintInput,
        t: DVector<f64>,
        method: Method,
        iterations: usize,
    ) -> Self {
        let residual = residuals(input, &t).amax();
        let c = t.map(f64::ln);
        let box_margin = (0..input.rank())
            .map(|i| (1.0 - t[i]).min((input.area - input.a[i] * t[i]) / input.area))
            .fold(f64::INFINITY, f64::min);
        ConstraintSolution {
            t,
            c,
            residual,
            method,
            iterations,
            box_margin,
        }
    }

    /// Inside `0 < t_i ≤ 1`, `a_i t_i ≤ |Ω|` up to round-off.
    pub fn within_box(&self) -> bool {
        self.t.iter().all(|&x| x > 0.0) && self.box_margin >= -1e-12
    }
}

/// Solve with the requested strategy, checking admissibility first.
pub fn solve(
    input: &ConstraintInput,
    method: ConstraintMethod,
) -> Result<ConstraintSolution, ConstraintError> {
    match method {
        ConstraintMethod::Auto if input.rank() == 1 => scalar_closed_form(input),
        ConstraintMethod::Auto | ConstraintMethod::Homotopy => {
            solve_homotopy(input, &HomotopyOptions::default())
        }
        ConstraintMethod::Squeeze => solve_squeeze(input),
    }
}

pub(crate) fn require_admissible(input: &ConstraintInput) -> Result<(), ConstraintError> {
    let margins = admissible(input);
    if is_admissible(&margins) {
        Ok(())
    } else {
        Err(ConstraintError::Inadmissible { margins })
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::lie_cartan::{AlgebraSpec, CartanData, Family};
    use rand::Rng;

    pub fn numeric(family: Family, rank: usize) -> CartanNumeric {
        CartanData::from_spec(&AlgebraSpec::simple(family, rank)).unwrap().numeric()
    }

    /// Coefficients of random mean-zero log-densities on `m` equal cells, so
    /// Hölder and Jensen hold exactly as for quadrature sums.
    pub fn random_coefficients<R: Rng>(rng: &mut R, n: usize, m: usize, amp: f64, area: f64) -> (DVector<f64>, DMatrix<f64>) {
        let cell = area / m as f64;
        let g: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut v: Vec<f64> = (0..m).map(|_| rng.gen_range(-amp..amp)).collect();
                let mean = v.iter().sum::<f64>() / m as f64;
                v.iter_mut().for_each(|x| *x -= mean);
                v
            })
            .collect();
        let a = DVector::from_fn(n, |i, _| g[i].iter().map(|x| x.exp()).sum::<f64>() * cell);
        let am = DMatrix::from_fn(n, n, |i, j| {
            g[i].iter().zip(&g[j]).map(|(x, y)| (x + y).exp()).sum::<f64>() * cell
        });
        (a, am)
    }

    /// Smallest λ making `(a, aM, b)` admissible.
    pub fn lambda_boundary(data: &CartanNumeric, a: &DVector<f64>, am: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
        (0..data.n)
            .map(|i| 4.0 * data.alpha[(i, i)] * data.p[i] * data.p[i] * b[i] * am[(i, i)] / (a[i] * a[i]))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use crate::lie_cartan::Family;
    use std::f64::consts::PI;

    fn rank1_input(data: &CartanNumeric, a: f64, a11: f64, b: f64, lambda: f64) -> ConstraintInput<'_> {
        ConstraintInput::new(
            data,
            DVector::from_element(1, a),
            DMatrix::from_element(1, 1, a11),
            DVector::from_element(1, b),
            lambda,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn rank1_admissibility_threshold() {
        let d = numeric(Family::A, 1);
        let n = 2.0;
        // direct substitution: 1 - 4·2·1·πN/λ ≥ 0 ⇔ λ ≥ 8πN
        let at = |lambda| admissible(&rank1_input(&d, 1.0, 1.0, PI * n, lambda))[0];
        assert!(at(8.0 * PI * n).abs() < 1e-14);
        assert!(at(8.0 * PI * n * 1.001) > 0.0);
        assert!(at(8.0 * PI * n * 0.999) < 0.0);
        // λ → ∞ leaves a²/a_ii
        let big = admissible(&rank1_input(&d, 1.3, 2.0, PI, 1e300))[0];
        assert!((big - 1.3 * 1.3 / 2.0).abs() < 1e-14);
    }

    #[test]
    fn a3_boundary_margins() {
        let d = numeric(Family::A, 3);
        let a = DVector::from_vec(vec![1.2, 1.1, 1.3]);
        let am = DMatrix::from_fn(3, 3, |i, j| if i == j { [1.5, 1.4, 1.9][i] } else { 1.2 });
        let lambda = 100.0;
        // pick b so that a_i²/a_ii = 8 b_i / λ
        let b = DVector::from_fn(3, |i, _| a[i] * a[i] / am[(i, i)] * lambda / 8.0);
        let input = ConstraintInput::new(&d, a, am, b, lambda, 1.0).unwrap();
        for m in admissible(&input) {
            assert!(m.abs() < 1e-13);
        }
    }

    #[test]
    fn epsilon_zero_fixed_point_is_linear_solve() {
        let d = numeric(Family::A, 3);
        let mut rng = rand::thread_rng();
        let (a, am) = random_coefficients(&mut rng, 3, 40, 0.5, 1.0);
        let b = DVector::from_vec(vec![6.0 * PI, 8.0 * PI, 6.0 * PI]);
        let input = ConstraintInput::new(&d, a.clone(), am, b, 1000.0, 1.0).unwrap();
        let qt = q_tilde(&input);
        let rhs = DVector::from_fn(3, |i, _| d.r[i] * a[i] / d.p[i]);
        let t0 = qt.clone().lu().solve(&rhs).unwrap();
        let f0 = f_map(&input, 0.0, &t0).unwrap();
        assert!((f0 - &t0).amax() < 1e-13);
        assert!((&qt * &t0 - rhs).amax() < 1e-12);
    }

    #[test]
    fn vortex_free_fixed_point_is_one() {
        let d = numeric(Family::A, 3);
        let input = ConstraintInput::new(
            &d,
            DVector::from_element(3, 1.0),
            DMatrix::from_element(3, 3, 1.0),
            DVector::zeros(3),
            7.0,
            1.0,
        )
        .unwrap();
        let ones = DVector::from_element(3, 1.0);
        for eps in [0.0, 0.5, 1.0] {
            let f = f_map(&input, eps, &ones).unwrap();
            assert!((f - &ones).amax() < 1e-14);
        }
    }

    #[test]
    fn rank1_fixed_point_example() {
        let d = numeric(Family::A, 1);
        let n = 1.0;
        let input = rank1_input(&d, 1.0, 1.0, PI * n, 16.0 * PI * n);
        // oracle: quadratic formula on ξ² − ξ + 2πN/λ = 0
        let c = 2.0 * PI * n / (16.0 * PI * n);
        let xi = (1.0 + (1.0 - 4.0 * c).sqrt()) / 2.0;
        assert!((xi - (1.0 + 0.5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((xi - 0.853_553_390_6).abs() < 1e-10);
        let f = f_map(&input, 1.0, &DVector::from_element(1, xi)).unwrap();
        assert!((f[0] - xi).abs() < 1e-15);
    }

    #[test]
    fn infeasible_discriminant_reported() {
        let d = numeric(Family::A, 1);
        let input = rank1_input(&d, 1.0, 1.0, PI, 1.0);
        assert!(matches!(
            f_map(&input, 1.0, &DVector::from_element(1, 0.5)),
            Err(ConstraintError::Infeasible { index: 0, .. })
        ));
    }

    #[test]
    fn malformed_inputs_rejected() {
        let d = numeric(Family::A, 2);
        let bad = ConstraintInput::new(
            &d,
            DVector::from_element(2, 1.0),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.6, 1.0]),
            DVector::zeros(2),
            1.0,
            1.0,
        );
        assert!(bad.is_err());
        let bad = ConstraintInput::new(
            &d,
            DVector::from_element(2, 1.0),
            DMatrix::from_element(2, 2, 1.0),
            DVector::zeros(2),
            -1.0,
            1.0,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn q_tilde_positive_definite_under_holder() {
        let mut rng = rand::thread_rng();
        for (fam, rank) in [(Family::A, 4), (Family::B, 3), (Family::G, 2), (Family::E, 6)] {
            let d = numeric(fam, rank);
            for _ in 0..20 {
                let (a, am) = random_coefficients(&mut rng, rank, 30, 1.0, 1.0);
                let input = ConstraintInput::new(&d, a, am, DVector::zeros(rank), 1.0, 1.0).unwrap();
                assert!(q_tilde(&input).cholesky().is_some());
            }
        }
    }
}
