use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use super::FieldError;

/// Uniform periodic grid on the rectangle `[0, L1) × [0, L2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    l1: f64,
    l2: f64,
    m1: usize,
    m2: usize,
}

impl TorusGrid {
    pub fn new(l1: f64, l2: f64, m1: usize, m2: usize) -> Result<Self, FieldError> {
        if !(l1.is_finite() && l1 > 0.0 && l2.is_finite() && l2 > 0.0) {
            return Err(FieldError::InvalidGrid(format!("side lengths must be positive, got {l1} x {l2}")));
        }
        if m1 < 2 || m2 < 2 || m1 % 2 != 0 || m2 % 2 != 0 {
            return Err(FieldError::InvalidGrid(format!(
                "resolutions must be even and >= 2, got {m1} x {m2}"
            )));
        }
        Ok(TorusGrid { l1, l2, m1, m2 })
    }

    pub fn unit_square(m: usize) -> Result<Self, FieldError> {
        Self::new(1.0, 1.0, m, m)
    }

    pub fn l1(&self) -> f64 {
        self.l1
    }
    pub fn l2(&self) -> f64 {
        self.l2
    }
    pub fn m1(&self) -> usize {
        self.m1
    }
    pub fn m2(&self) -> usize {
        self.m2
    }
    pub fn len(&self) -> usize {
        self.m1 * self.m2
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn area(&self) -> f64 {
        self.l1 * self.l2
    }
    pub fn h1(&self) -> f64 {
        self.l1 / self.m1 as f64
    }
    pub fn h2(&self) -> f64 {
        self.l2 / self.m2 as f64
    }
    pub fn max_spacing(&self) -> f64 {
        self.h1().max(self.h2())
    }
    /// Quadrature weight of one node.
    pub fn cell_area(&self) -> f64 {
        self.h1() * self.h2()
    }

    pub fn point(&self, i1: usize, i2: usize) -> (f64, f64) {
        (i1 as f64 * self.h1(), i2 as f64 * self.h2())
    }

    /// Signed integer frequency for FFT index `idx` of an `m`-point transform.
    pub(crate) fn frequency(idx: usize, m: usize) -> f64 {
        if idx < m / 2 {
            idx as f64
        } else {
            idx as f64 - m as f64
        }
    }

    /// `|k|²` for every FFT index, row-major.
    pub fn wavenumbers_squared(&self) -> Vec<f64> {
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut k2 = Vec::with_capacity(self.len());
        for i1 in 0..self.m1 {
            let kx = two_pi * Self::frequency(i1, self.m1) / self.l1;
            for i2 in 0..self.m2 {
                let ky = two_pi * Self::frequency(i2, self.m2) / self.l2;
                k2.push(kx * kx + ky * ky);
            }
        }
        k2
    }

    /// Reduce a point into the fundamental cell.
    pub fn reduce(&self, x: f64, y: f64) -> (f64, f64) {
        (x.rem_euclid(self.l1), y.rem_euclid(self.l2))
    }
}

/// Real samples on a [`TorusGrid`], row-major with index `i1 * M2 + i2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: TorusGrid, value: f64) -> Self {
        Field {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::Format(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn from_fn(grid: TorusGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i1 in 0..grid.m1() {
            for i2 in 0..grid.m2() {
                let (x, y) = grid.point(i1, i2);
                values.push(f(x, y));
            }
        }
        Field { grid, values }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.grid.area()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Mean-zero within `1e-12 · max(1, max|f|)`.
    pub fn is_mean_zero(&self) -> bool {
        self.mean().abs() <= 1e-12 * self.max_abs().max(1.0)
    }

    pub fn subtract_mean(&mut self) {
        let m = self.values.iter().sum::<f64>() / self.values.len() as f64;
        self.values.iter_mut().for_each(|v| *v -= m);
    }

    pub fn without_mean(mut self) -> Self {
        self.subtract_mean();
        self
    }

    /// L² inner product by quadrature.
    pub fn dot(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_area()
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        Field {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &Field) {
        debug_assert_eq!(self.grid, x.grid);
        self.values.iter_mut().zip(&x.values).for_each(|(s, &v)| *s += alpha * v);
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn at(&self, i1: usize, i2: usize) -> f64 {
        self.values[i1 * self.grid.m2() + i2]
    }
}

impl Index<usize> for Field {
    type Output = f64;
    fn index(&self, idx: usize) -> &f64 {
        &self.values[idx]
    }
}

impl IndexMut<usize> for Field {
    fn index_mut(&mut self, idx: usize) -> &mut f64 {
        &mut self.values[idx]
    }
}
