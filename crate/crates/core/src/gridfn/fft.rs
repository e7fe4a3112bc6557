//! Multi-dimensional FFT plumbing and the continuous-transform view of a grid function.
//!
//! Convention (the only place it is fixed): the raw forward FFT carries no normalization,
//! the raw inverse divides by `n^dim`. [`Spectrum`] stores the Riemann-sum approximation of
//! the continuous transform `F[u](ξ) = ∫ e^{-2πi ξ·x} u(x) dx`, i.e.
//! `F_k = h^dim (-1)^{k_1+…+k_dim} FFT[u]_k`, where the sign accounts for the grid
//! starting at `-L` instead of `0`. With this scaling, Plancherel reads
//! `∫|u|² = (2L)^{-dim} Σ_k |F_k|²`.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{FourierMultiplier, Grid, GridFunction};
use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// In-place FFT over every axis of a row-major `n^dim` array.
pub(crate) fn fft_nd(data: &mut [Complex64], n: usize, dim: usize, inverse: bool) {
    let fft = plan(n, inverse);
    let total = data.len();
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut line = vec![Complex64::default(); n];
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        if stride == 1 {
            for chunk in data.chunks_exact_mut(n) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
            continue;
        }
        let block = stride * n;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
    if inverse {
        let scale = 1.0 / total as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Parity of the multi-index of a flat position: `(-1)^{k_1+…+k_dim}`.
fn parity(grid: &Grid, idx: usize) -> f64 {
    let n = grid.n();
    let mut rest = idx;
    let mut sum = 0usize;
    for _ in 0..grid.dim() {
        sum += rest % n;
        rest /= n;
    }
    if sum % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Approximation of the continuous Fourier transform of a grid function, sampled at the
/// grid's discrete frequencies (cycles per unit length).
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn of(f: &GridFunction) -> Self {
        let grid = *f.grid();
        let mut coeffs: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(&mut coeffs, grid.n(), grid.dim(), false);
        let w = grid.cell_volume();
        for (idx, c) in coeffs.iter_mut().enumerate() {
            *c *= w * parity(&grid, idx);
        }
        Self { grid, coeffs }
    }

    /// Tabulates a symbol at the grid frequencies. Non-finite values at `ξ = 0` become 0.
    pub fn from_symbol(grid: Grid, symbol: &FourierMultiplier) -> Result<Self> {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
        let mut xi = [0.0; 3];
        for (idx, c) in coeffs.iter_mut().enumerate() {
            grid.frequency_of(idx, &mut xi);
            *c = symbol.eval_checked(&xi[..grid.dim()])?;
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Pointwise multiplication by a symbol.
    pub fn apply(&mut self, m: &FourierMultiplier) -> Result<()> {
        let mut xi = [0.0; 3];
        let dim = self.grid.dim();
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            self.grid.frequency_of(idx, &mut xi);
            *c *= m.eval_checked(&xi[..dim])?;
        }
        Ok(())
    }

    pub fn product(&self, other: &Spectrum) -> Result<Spectrum> {
        self.grid.ensure_same(&other.grid)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Spectrum {
            grid: self.grid,
            coeffs,
        })
    }

    /// `∫|u|²` evaluated on the frequency side.
    pub fn l2_norm_squared(&self) -> f64 {
        let period = (2.0 * self.grid.half_width()).powi(self.grid.dim() as i32);
        crate::numerics::compensated_sum(self.coeffs.iter().map(|c| c.norm_sqr())) / period
    }

    /// Complex inverse transform on the grid.
    pub fn to_complex_values(&self) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, c)| c * parity(&self.grid, idx))
            .collect();
        fft_nd(&mut data, self.grid.n(), self.grid.dim(), true);
        let w = 1.0 / self.grid.cell_volume();
        for v in data.iter_mut() {
            *v *= w;
        }
        data
    }

    /// Inverse transform, keeping the real part.
    pub fn to_real(&self) -> Result<GridFunction> {
        let values = self.to_complex_values().into_iter().map(|c| c.re).collect();
        let out = GridFunction::from_raw(self.grid, values);
        out.ensure_finite("inverse transform")?;
        Ok(out)
    }

    /// Largest imaginary part left after the inverse transform.
    pub fn max_imaginary_residual(&self) -> f64 {
        self.to_complex_values()
            .iter()
            .fold(0.0, |m, c| m.max(c.im.abs()))
    }
}

impl From<&GridFunction> for Spectrum {
    fn from(f: &GridFunction) -> Self {
        Spectrum::of(f)
    }
}

#[allow(dead_code)]
pub(crate) fn check_finite(coeffs: &[Complex64]) -> Result<()> {
    if coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("spectrum".into()))
    }
}
