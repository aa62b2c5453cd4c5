//! Doubly periodic domain: grid, fields, spectral calculus, background
//! functions `u⁰ᵢ` and the integral coefficients `aᵢ`, `aᵢⱼ`.

mod grid;
mod io;
mod spectral;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grid::{Field, TorusGrid};
pub use io::{read_binary, read_csv, write_binary, write_csv};
pub use spectral::Spectral;

/// Largest exponent accepted before reporting a range error.
pub const EXPONENT_LIMIT: f64 = 700.0;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("mollification width {sigma} is below grid spacing {spacing}")]
    Resolution { sigma: f64, spacing: f64 },
    #[error("exponent {value} out of range at equation {index}")]
    Range { index: usize, value: f64 },
    #[error("vortex index {index} out of range for rank {rank}")]
    VortexIndex { index: usize, rank: usize },
    #[error("invalid vortex: {0}")]
    InvalidVortex(String),
    #[error("field format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vortex {
    pub x: f64,
    pub y: f64,
    pub multiplicity: u32,
}

/// Vortex points `p_ij` grouped by equation index (0-based here).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VortexConfiguration {
    per_index: Vec<Vec<Vortex>>,
}

impl VortexConfiguration {
    pub fn new(rank: usize) -> Self {
        VortexConfiguration {
            per_index: vec![Vec::new(); rank],
        }
    }

    pub fn rank(&self) -> usize {
        self.per_index.len()
    }

    /// Add a point for equation `index`, reduced modulo the lattice.
    pub fn push(
        &mut self,
        grid: &TorusGrid,
        index: usize,
        x: f64,
        y: f64,
        multiplicity: u32,
    ) -> Result<(), FieldError> {
        if index >= self.rank() {
            return Err(FieldError::VortexIndex {
                index,
                rank: self.rank(),
            });
        }
        if multiplicity == 0 {
            return Err(FieldError::InvalidVortex("multiplicity must be >= 1".into()));
        }
        if !(x.is_finite() && y.is_finite()) {
            return Err(FieldError::InvalidVortex(format!("non-finite point ({x}, {y})")));
        }
        let (x, y) = grid.reduce(x, y);
        self.per_index[index].push(Vortex { x, y, multiplicity });
        Ok(())
    }

    pub fn points(&self, index: usize) -> &[Vortex] {
        &self.per_index[index]
    }

    /// `N_i`, the total multiplicity per equation.
    pub fn counts(&self) -> Vec<u32> {
        self.per_index
            .iter()
            .map(|v| v.iter().map(|p| p.multiplicity).sum())
            .collect()
    }
}

/// Nearest-image displacement in `[-l/2, l/2]`.
fn wrap(d: f64, l: f64) -> f64 {
    d - l * (d / l).round()
}

/// Periodic Gaussian of unit discrete mass centred at `(px, py)`.
fn mollified_delta(grid: &TorusGrid, px: f64, py: f64, sigma: f64) -> Field {
    let (l1, l2) = (grid.l1(), grid.l2());
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut f = Field::from_fn(*grid, |x, y| {
        let dx0 = wrap(x - px, l1);
        let dy0 = wrap(y - py, l2);
        let mut acc = 0.0;
        for s1 in -1..=1 {
            let dx = dx0 + s1 as f64 * l1;
            for s2 in -1..=1 {
                let dy = dy0 + s2 as f64 * l2;
                acc += (-(dx * dx + dy * dy) * inv).exp();
            }
        }
        acc
    });
    let mass = f.integral();
    f.scale(1.0 / mass);
    f
}

/// The background functions `u⁰ᵢ` with their data.
#[derive(Clone, Debug)]
pub struct BackgroundField {
    u0: Vec<Field>,
    counts: Vec<u32>,
    sigma: f64,
    sources: Vec<Field>,
}

impl BackgroundField {
    pub fn u0(&self) -> &[Field] {
        &self.u0
    }
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn rank(&self) -> usize {
        self.u0.len()
    }
    pub fn grid(&self) -> &TorusGrid {
        self.u0[0].grid()
    }
    /// The mollified source `4π Σ δ̃` of each equation.
    pub fn sources(&self) -> &[Field] {
        &self.sources
    }

    /// The single-equation background of component `i`.
    pub fn component(&self, i: usize) -> BackgroundField {
        BackgroundField {
            u0: vec![self.u0[i].clone()],
            counts: vec![self.counts[i]],
            sigma: self.sigma,
            sources: vec![self.sources[i].clone()],
        }
    }
}

/// Default mollification width: two grid spacings.
pub fn default_sigma(grid: &TorusGrid) -> f64 {
    2.0 * grid.max_spacing()
}

/// Solve `Δu⁰ = 4π Σ δ̃_p - 4πN/|Ω|` with `∫u⁰ = 0`, one field per equation.
pub fn background(
    spectral: &Spectral,
    vortices: &VortexConfiguration,
    sigma: f64,
) -> Result<BackgroundField, FieldError> {
    let grid = *spectral.grid();
    let spacing = grid.max_spacing();
    if !(sigma >= spacing * (1.0 - 1e-12)) {
        return Err(FieldError::Resolution { sigma, spacing });
    }
    let four_pi = 4.0 * std::f64::consts::PI;
    let counts = vortices.counts();
    let mut u0 = Vec::with_capacity(vortices.rank());
    let mut sources = Vec::with_capacity(vortices.rank());
    for (i, &ni) in counts.iter().enumerate() {
        let mut src = Field::zeros(grid);
        for p in vortices.points(i) {
            src.axpy(four_pi * p.multiplicity as f64, &mollified_delta(&grid, p.x, p.y, sigma));
        }
        let rhs = src.map(|v| v - four_pi * ni as f64 / grid.area());
        u0.push(if ni == 0 { Field::zeros(grid) } else { spectral.inverse_laplacian(&rhs) });
        sources.push(src);
    }
    Ok(BackgroundField {
        u0,
        counts,
        sigma,
        sources,
    })
}

/// `aᵢ = ∫ e^{u⁰ᵢ+wᵢ}` and `aᵢⱼ = ∫ e^{u⁰ᵢ+u⁰ⱼ+wᵢ+wⱼ}` by quadrature.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegralCoefficients {
    pub a: DVector<f64>,
    pub a_matrix: DMatrix<f64>,
}

/// Pointwise `e^{u⁰ᵢ + wᵢ}` for every equation.
pub fn exp_fields(bg: &BackgroundField, w: &[Field]) -> Result<Vec<Field>, FieldError> {
    assert_eq!(w.len(), bg.rank(), "w has wrong number of components");
    bg.u0()
        .iter()
        .zip(w)
        .enumerate()
        .map(|(i, (u0, wi))| {
            let sum = u0.zip_map(wi, |a, b| a + b);
            let worst = sum.max_abs();
            if !(worst <= EXPONENT_LIMIT) {
                return Err(FieldError::Range { index: i, value: worst });
            }
            Ok(sum.map(f64::exp))
        })
        .collect()
}

/// Coefficients from precomputed exponentials `E_i = e^{u⁰ᵢ+wᵢ}`.
pub fn coefficients_from_exp(e: &[Field]) -> IntegralCoefficients {
    let n = e.len();
    let a = DVector::from_iterator(n, e.iter().map(Field::integral));
    let mut a_matrix = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = e[i].dot(&e[j]);
            a_matrix[(i, j)] = v;
            a_matrix[(j, i)] = v;
        }
    }
    IntegralCoefficients { a, a_matrix }
}

pub fn coefficients_a(bg: &BackgroundField, w: &[Field]) -> Result<IntegralCoefficients, FieldError> {
    Ok(coefficients_from_exp(&exp_fields(bg, w)?))
}
