//! Periodic uniform grids on `[−L, L)^dim` and real scalar fields living on them.
//!
//! Node `j` along an axis sits at `−L + j h` with `h = 2L/n`; arrays are row-major with axis 0
//! varying slowest. The origin is node `n/2` on every axis.

mod fft;
mod io;
mod multiplier;

pub use fft::Spectrum;
pub use multiplier::FourierMultiplier;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::compensated_sum;

pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, n: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("half width must be positive, got {half_width}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n must be a power of two >= 8, got {n}")));
        }
        Ok(Self { dim, half_width, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Number of nodes, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinate of node `j` along any axis.
    pub fn coord(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    /// Axis coordinates of all nodes.
    pub fn axis(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.coord(j)).collect()
    }

    pub fn origin_index(&self) -> usize {
        self.n / 2
    }

    /// Flat index of the origin node.
    pub fn origin_flat(&self) -> usize {
        self.ravel(&[self.origin_index(); MAX_DIM][..self.dim])
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &j| acc * self.n + j)
    }

    pub fn unravel(&self, mut idx: usize, out: &mut [usize; MAX_DIM]) {
        for a in (0..self.dim).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
    }

    /// Physical position of a flat index; only the first `dim` entries are written.
    pub fn point_of(&self, idx: usize, out: &mut [f64; MAX_DIM]) {
        let mut m = [0usize; MAX_DIM];
        self.unravel(idx, &mut m);
        for a in 0..self.dim {
            out[a] = self.coord(m[a]);
        }
    }

    /// Frequency (cycles per unit length) of FFT index `k` along an axis.
    pub fn frequency(&self, k: usize) -> f64 {
        let p = 2.0 * self.half_width;
        if k < self.n / 2 {
            k as f64 / p
        } else {
            (k as f64 - self.n as f64) / p
        }
    }

    pub fn frequency_of(&self, idx: usize, out: &mut [f64; MAX_DIM]) {
        let mut m = [0usize; MAX_DIM];
        self.unravel(idx, &mut m);
        for a in 0..self.dim {
            out[a] = self.frequency(m[a]);
        }
    }

    /// Maps a coordinate into `[−L, L)` periodically.
    pub fn wrap(&self, x: f64) -> f64 {
        if (-self.half_width..self.half_width).contains(&x) {
            return x;
        }
        let p = 2.0 * self.half_width;
        let y = (x + self.half_width).rem_euclid(p) - self.half_width;
        // rem_euclid may round up to exactly p
        if y >= self.half_width {
            y - p
        } else {
            y
        }
    }

    /// Flat index of the node at `−x` (reflection through the origin).
    pub fn reflected_index(&self, idx: usize) -> usize {
        let mut m = [0usize; MAX_DIM];
        self.unravel(idx, &mut m);
        for v in m.iter_mut().take(self.dim) {
            *v = (self.n - *v) % self.n;
        }
        self.ravel(&m[..self.dim])
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }

    /// Same half width and dimension with a different resolution.
    pub fn with_n(&self, n: usize) -> Result<Grid> {
        Grid::new(self.dim, self.half_width, n)
    }

    pub fn with_dim(&self, dim: usize) -> Result<Grid> {
        Grid::new(dim, self.half_width, self.n)
    }
}

/// Norms offered by [`GridFunction::lp_norm`] and [`GridFunction::sobolev_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
    Inf,
}

/// Tolerances applied to density-flagged fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub mass: f64,
    pub neg: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            mass: 1e-8,
            neg: 1e-12,
        }
    }
}

/// Multilinear interpolation stencil: up to `2^dim` (flat index, weight) pairs.
pub(crate) struct Stencil {
    pub idx: [usize; 8],
    pub w: [f64; 8],
    pub len: usize,
}

/// A real field sampled on a [`Grid`]. Values are finite after every public operation.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        let f = Self { grid, values };
        f.ensure_finite("input values")?;
        Ok(f)
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::from_raw(grid, vec![0.0; grid.len()])
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self::from_raw(grid, vec![c; grid.len()])
    }

    /// Samples `f` at every node. The closure receives the first `dim` coordinates.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut p = [0.0; MAX_DIM];
        let values = (0..grid.len())
            .map(|idx| {
                grid.point_of(idx, &mut p);
                f(&p[..grid.dim()])
            })
            .collect();
        Self::new(grid, values)
    }

    /// Discrete delta: `1/h^dim` at the origin node.
    pub fn delta(grid: Grid) -> Self {
        let mut f = Self::zeros(grid);
        f.values[grid.origin_flat()] = 1.0 / grid.cell_volume();
        f
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub(crate) fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    /// `∫ f dx` by the periodic rectangle rule (compensated sum).
    pub fn quadrature(&self) -> f64 {
        self.grid.cell_volume() * compensated_sum(self.values.iter().copied())
    }

    pub fn lp_norm(&self, p: Norm) -> f64 {
        let w = self.grid.cell_volume();
        match p {
            Norm::L1 => w * compensated_sum(self.values.iter().map(|v| v.abs())),
            Norm::L2 => (w * compensated_sum(self.values.iter().map(|v| v * v))).sqrt(),
            Norm::Inf => self.max_abs(),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.lp_norm(Norm::L2)
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

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Self::new(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// `∫ f g dx`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self.grid.cell_volume()
            * compensated_sum(self.values.iter().zip(&other.values).map(|(a, b)| a * b)))
    }

    /// `x ↦ f(−x)`.
    pub fn reflect(&self) -> Self {
        let values = (0..self.grid.len())
            .map(|idx| self.values[self.grid.reflected_index(idx)])
            .collect();
        Self::from_raw(self.grid, values)
    }

    /// Circular convolution `(f * g)(x) = ∫ f(x − y) g(y) dy`.
    pub fn convolve(&self, g: &Self) -> Result<Self> {
        self.grid.ensure_same(&g.grid)?;
        Spectrum::of(self).product(&Spectrum::of(g))?.to_real()
    }

    pub fn apply_multiplier(&self, m: &FourierMultiplier) -> Result<Self> {
        let mut s = Spectrum::of(self);
        s.apply(m)?;
        s.to_real()
    }

    /// Spectral partial derivative along `axis`.
    pub fn derivative(&self, axis: usize) -> Result<Self> {
        if axis >= self.grid.dim {
            return Err(crate::error::invalid(format!(
                "axis {axis} out of range for dim {}",
                self.grid.dim
            )));
        }
        self.apply_multiplier(&FourierMultiplier::derivative(axis))
    }

    /// One spectral partial derivative per axis.
    pub fn gradient(&self) -> Result<Vec<Self>> {
        let s = Spectrum::of(self);
        (0..self.grid.dim)
            .map(|a| {
                let mut c = s.clone();
                c.apply(&FourierMultiplier::derivative(a))?;
                c.to_real()
            })
            .collect()
    }

    /// `‖(1 − Δ)^{s/2} f‖_{L^p}`. Fractional `s` is only supported for `p = 2`.
    pub fn sobolev_norm(&self, s: f64, p: Norm) -> Result<f64> {
        if p != Norm::L2 && s.fract() != 0.0 {
            return Err(Error::UnsupportedNorm { s });
        }
        if s == 0.0 {
            return Ok(self.lp_norm(p));
        }
        if p == Norm::L2 {
            let mut spec = Spectrum::of(self);
            spec.apply(&FourierMultiplier::bessel(s))?;
            return Ok(spec.l2_norm_squared().sqrt());
        }
        Ok(self.apply_multiplier(&FourierMultiplier::bessel(s))?.lp_norm(p))
    }

    pub(crate) fn stencil(&self, x: &[f64]) -> Stencil {
        stencil(&self.grid, x)
    }

    /// Multilinear interpolation at `x` (wrapped periodically).
    pub fn evaluate_at(&self, x: &[f64]) -> f64 {
        let st = self.stencil(x);
        let mut acc = 0.0;
        for c in 0..st.len {
            acc += st.w[c] * self.values[st.idx[c]];
        }
        acc
    }

    /// Density of the empirical measure `(1/N) Σ δ_{x_i}` spread onto the grid with the
    /// same multilinear weights as [`evaluate_at`](Self::evaluate_at). `points` holds
    /// `dim` coordinates per particle.
    pub fn deposit(grid: Grid, points: &[f64]) -> Result<Self> {
        let d = grid.dim();
        if points.is_empty() || points.len() % d != 0 {
            return Err(crate::error::invalid(format!(
                "deposit needs a nonempty multiple of {d} coordinates, got {}",
                points.len()
            )));
        }
        let count = points.len() / d;
        let mass = 1.0 / (count as f64 * grid.cell_volume());
        let mut values = vec![0.0; grid.len()];
        for p in points.chunks_exact(d) {
            let st = stencil(&grid, p);
            for c in 0..st.len {
                values[st.idx[c]] += st.w[c] * mass;
            }
        }
        Self::new(grid, values)
    }

    /// Mass of `|f|` on nodes within one spacing of the domain boundary.
    pub fn boundary_mass(&self) -> f64 {
        let n = self.grid.n;
        let mut m = [0usize; MAX_DIM];
        let mut acc = Vec::new();
        for (idx, v) in self.values.iter().enumerate() {
            self.grid.unravel(idx, &mut m);
            if m[..self.grid.dim].iter().any(|&j| j == 0 || j == n - 1) {
                acc.push(v.abs());
            }
        }
        self.grid.cell_volume() * compensated_sum(acc)
    }

    /// Logs a warning when the boundary mass exceeds `threshold`; returns the mass.
    pub fn warn_if_boundary_mass(&self, what: &str, threshold: f64) -> f64 {
        let m = self.boundary_mass();
        if m > threshold {
            log::warn!("{what}: mass {m:e} within one cell of the boundary exceeds {threshold:e}");
        }
        m
    }

    /// Checks the density contract: values ≥ −tol.neg and unit mass within tol.mass.
    pub fn check_density(&self, tol: &Tolerances) -> Result<()> {
        let min = self.min();
        if min < -tol.neg {
            return Err(Error::NotADensity(format!("minimum value {min:e} below −{:e}", tol.neg)));
        }
        let mass = self.quadrature();
        if (mass - 1.0).abs() > tol.mass {
            return Err(Error::NotADensity(format!("mass {mass} differs from 1 by more than {:e}", tol.mass)));
        }
        Ok(())
    }

    /// Clips negative values to 0 and rescales to unit mass. Returns the relative mass change.
    pub fn normalize_density(&mut self) -> Result<f64> {
        for v in self.values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let mass = self.quadrature();
        if !(mass > 0.0) {
            return Err(Error::NotADensity(format!("nonpositive mass {mass}")));
        }
        for v in self.values.iter_mut() {
            *v /= mass;
        }
        Ok(mass - 1.0)
    }
}

fn stencil(grid: &Grid, x: &[f64]) -> Stencil {
    let n = grid.n();
    let h = grid.spacing();
    let mut lo = [0usize; MAX_DIM];
    let mut frac = [0.0; MAX_DIM];
    for a in 0..grid.dim() {
        let t = (grid.wrap(x[a]) + grid.half_width()) / h;
        let f = t.floor();
        lo[a] = (f as usize) % n;
        frac[a] = t - f;
    }
    let corners = 1usize << grid.dim();
    let mut st = Stencil {
        idx: [0; 8],
        w: [0.0; 8],
        len: corners,
    };
    for c in 0..corners {
        let mut idx = 0;
        let mut w = 1.0;
        for a in 0..grid.dim() {
            let up = (c >> (grid.dim() - 1 - a)) & 1 == 1;
            let j = if up { (lo[a] + 1) % n } else { lo[a] };
            w *= if up { frac[a] } else { 1.0 - frac[a] };
            idx = idx * n + j;
        }
        st.idx[c] = idx;
        st.w[c] = w;
    }
    st
}

#[cfg(test)]
mod tests;
