//! FFT-backed calculus on a [`TorusGrid`].

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Field, TorusGrid};

/// Planned transforms and the `|k|²` table for one grid.
///
/// Shareable across threads; scratch buffers are allocated per call.
#[derive(Clone)]
pub struct Spectral {
    grid: TorusGrid,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    k2: Vec<f64>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: TorusGrid) -> Self {
        let mut planner = FftPlanner::new();
        Spectral {
            grid,
            row_fwd: planner.plan_fft_forward(grid.m2()),
            row_inv: planner.plan_fft_inverse(grid.m2()),
            col_fwd: planner.plan_fft_forward(grid.m1()),
            col_inv: planner.plan_fft_inverse(grid.m1()),
            k2: grid.wavenumbers_squared(),
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    fn transpose(src: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
        for r in 0..rows {
            for c in 0..cols {
                out[c * rows + r] = src[r * cols + c];
            }
        }
        out
    }

    /// Unnormalized 2-D DFT of real samples, row-major.
    pub fn forward(&self, f: &Field) -> Vec<Complex64> {
        debug_assert_eq!(f.grid(), &self.grid);
        let (m1, m2) = (self.grid.m1(), self.grid.m2());
        let mut buf: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.row_fwd.process(&mut buf);
        let mut t = Self::transpose(&buf, m1, m2);
        self.col_fwd.process(&mut t);
        Self::transpose(&t, m2, m1)
    }

    /// Inverse of [`forward`](Self::forward), keeping the real part.
    pub fn inverse(&self, mut spec: Vec<Complex64>) -> Field {
        let (m1, m2) = (self.grid.m1(), self.grid.m2());
        self.row_inv.process(&mut spec);
        let mut t = Self::transpose(&spec, m1, m2);
        self.col_inv.process(&mut t);
        let back = Self::transpose(&t, m2, m1);
        let scale = 1.0 / (m1 * m2) as f64;
        let values = back.into_iter().map(|c| c.re * scale).collect();
        Field::from_values(self.grid, values).expect("grid size preserved")
    }

    /// Multiply every Fourier mode by `symbol(|k|²)`.
    pub fn apply_symbol(&self, f: &Field, symbol: impl Fn(f64) -> f64) -> Field {
        let mut spec = self.forward(f);
        for (c, &k2) in spec.iter_mut().zip(&self.k2) {
            *c *= symbol(k2);
        }
        self.inverse(spec)
    }

    /// Spectral Laplacian of the trigonometric interpolant.
    pub fn laplacian(&self, f: &Field) -> Field {
        let mut out = self.apply_symbol(f, |k2| -k2);
        // zero mode is exactly 0; remove the round-off mean
        out.subtract_mean();
        out
    }

    /// Mean-zero solution `u` of `Δu = f - mean(f)`.
    pub fn inverse_laplacian(&self, f: &Field) -> Field {
        let mut out = self.apply_symbol(f, |k2| if k2 == 0.0 { 0.0 } else { -1.0 / k2 });
        out.subtract_mean();
        out
    }
}
