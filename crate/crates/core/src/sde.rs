//! Coupled particle systems in one dimension.
//!
//! The interacting system `dX^i = −(1/N) Σ_j k^ε(X^i − X^j) dt + σ dB^i` and the mean-field
//! system `dY^i = −(k^ε * ρ^ε_t)(Y^i) dt + σ dB^i` share their Brownian increments, start from
//! the same i.i.d. sample, and are advanced by Euler–Maruyama on the periodic domain.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gridfn::{Grid, GridFunction, Tolerances};
use crate::kernels::KernelPair;
use crate::rng::{Domain, Stream};

/// Default number of save intervals over `[0, T]`.
pub const DEFAULT_SAVE_INTERVALS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub n_particles: usize,
    pub sigma: f64,
    pub t_final: f64,
    pub dt: f64,
    /// Snapped to step boundaries by [`save_steps`](Self::save_steps).
    pub save_times: Vec<f64>,
    pub seed: u64,
    pub replica: u64,
}

impl SdeConfig {
    /// Config with `DEFAULT_SAVE_INTERVALS + 1` equispaced save times including `t = 0`.
    pub fn new(n_particles: usize, sigma: f64, t_final: f64, dt: f64, seed: u64, replica: u64) -> Result<Self> {
        let save_times = (0..=DEFAULT_SAVE_INTERVALS)
            .map(|k| t_final * k as f64 / DEFAULT_SAVE_INTERVALS as f64)
            .collect();
        let cfg = Self {
            n_particles,
            sigma,
            t_final,
            dt,
            save_times,
            seed,
            replica,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_save_times(mut self, save_times: Vec<f64>) -> Result<Self> {
        self.save_times = save_times;
        self.validate()?;
        Ok(self)
    }

    pub fn with_replica(mut self, replica: u64) -> Self {
        self.replica = replica;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(invalid("need at least one particle"));
        }
        // σ = 0 (deterministic dynamics) is accepted for testing
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        if !(self.dt > 0.0 && self.t_final > 0.0) {
            return Err(invalid("dt and T must be positive"));
        }
        let ratio = self.t_final / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(invalid(format!("T/dt = {ratio} is not an integer")));
        }
        if let Some(t) = self
            .save_times
            .iter()
            .find(|&&t| !(t >= -1e-12 && t <= self.t_final * (1.0 + 1e-12)))
        {
            return Err(invalid(format!("save time {t} outside [0, T]")));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Save times snapped to step indices, sorted and deduplicated.
    pub fn save_steps(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self
            .save_times
            .iter()
            .map(|t| ((t / self.dt).round() as usize).min(self.steps()))
            .collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// A 1D force sampled on a grid, evaluated by linear interpolation with periodic wrap.
/// Agrees with [`GridFunction::evaluate_at`] but avoids per-call overhead in the pair loop.
#[derive(Debug, Clone)]
pub struct KernelTable {
    /// `(value, slope)` at the nodes of `[−2L, 2L)`, the periodic extension of the force, so that
    /// differences of two positions in `[−L, L)` need no wrapping.
    nodes: Vec<[f64; 2]>,
    half_width: f64,
    inv_h: f64,
    zero: bool,
}

impl KernelTable {
    pub fn new(k: &GridFunction) -> Result<Self> {
        let g = k.grid();
        if g.dim() != 1 {
            return Err(invalid("particle dynamics are one-dimensional"));
        }
        let v = k.values();
        let n = v.len();
        // node m of the extension sits at −2L + m h ≡ −L + (m + n/2) h
        let nodes = (0..2 * n)
            .map(|m| {
                let i = (m + n / 2) % n;
                [v[i], v[(i + 1) % n] - v[i]]
            })
            .collect();
        Ok(Self {
            zero: v.iter().all(|&x| x == 0.0),
            nodes,
            half_width: g.half_width(),
            inv_h: 1.0 / g.spacing(),
        })
    }

    pub fn from_pair(pair: &KernelPair) -> Result<Self> {
        Self::new(pair.force())
    }

    /// True when the kernel vanishes identically.
    pub fn is_zero(&self) -> bool {
        self.zero
    }

    #[inline]
    pub fn eval(&self, mut d: f64) -> f64 {
        let l2 = 2.0 * self.half_width;
        if !(d >= -l2 && d < l2) {
            d = (d + l2).rem_euclid(2.0 * l2) - l2;
        }
        let t = (d + l2) * self.inv_h;
        let i = (t as i32 as usize).min(self.nodes.len() - 1);
        let [v, s] = self.nodes[i];
        v + (t - i as f64) * s
    }
}

/// `(1/N) Σ_j k(x_i − x_j)` for every `i`, the `j = i` term included.
/// Parallel over `i`; each inner sum runs in a fixed order, so results do not depend on the
/// number of threads.
pub fn pair_drift(positions: &[f64], table: &KernelTable) -> Vec<f64> {
    if table.is_zero() {
        return vec![0.0; positions.len()];
    }
    let inv_n = 1.0 / positions.len() as f64;
    positions
        .par_iter()
        .with_min_len(16)
        .map(|&xi| {
            let mut acc = 0.0;
            for &xj in positions {
                acc += table.eval(xi - xj);
            }
            acc * inv_n
        })
        .collect()
}

/// I.i.d. draws from a gridded density by inverting its piecewise-linear CDF; node `j` carries
/// the mass of the cell `[x_j − h/2, x_j + h/2)`.
pub fn sample_initial(rho0: &GridFunction, n: usize, seed: u64, replica: u64, tol: &Tolerances) -> Result<Vec<f64>> {
    let grid = *rho0.grid();
    if grid.dim() != 1 {
        return Err(invalid("initial sampling is one-dimensional"));
    }
    rho0.check_density(tol)?;
    let h = grid.spacing();
    let mass: Vec<f64> = rho0.values().iter().map(|v| v.max(0.0) * h).collect();
    let mut cdf = Vec::with_capacity(mass.len() + 1);
    let mut acc = 0.0;
    cdf.push(0.0);
    for m in &mass {
        acc += m;
        cdf.push(acc);
    }
    let total = acc;
    Ok((0..n)
        .map(|i| {
            let u = Stream::new(seed, replica, Domain::Initial, i as u64).uniform() * total;
            // first cell whose upper CDF value reaches u
            let c = cdf.partition_point(|&v| v < u).clamp(1, mass.len()) - 1;
            let within = if mass[c] > 0.0 { (u - cdf[c]) / mass[c] } else { 0.5 };
            grid.wrap(grid.coord(c) - h / 2.0 + within.clamp(0.0, 1.0) * h)
        })
        .collect())
}

/// Uniform atomic measure `(1/N) Σ δ_{x_i}`; positions are `dim`-strided.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    positions: Vec<f64>,
    dim: usize,
}

impl EmpiricalMeasure {
    pub fn new(positions: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || positions.is_empty() || positions.len() % dim != 0 {
            return Err(invalid("empirical measure needs a nonempty, dim-strided position list"));
        }
        Ok(Self { positions, dim })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// Grid density of the measure (multilinear deposit).
    pub fn deposit(&self, grid: Grid) -> Result<GridFunction> {
        if grid.dim() != self.dim {
            return Err(Error::GridMismatch(format!("measure in {}D, grid in {}D", self.dim, grid.dim())));
        }
        GridFunction::deposit(grid, &self.positions)
    }
}

/// `V * μ` on the grid via deposit and FFT convolution.
pub fn empirical_convolution(mu: &EmpiricalMeasure, v: &GridFunction) -> Result<GridFunction> {
    mu.deposit(*v.grid())?.convolve(v)
}

/// `V * μ` on the grid by direct summation `(1/N) Σ_i V(y − x_i)` with interpolated shifts.
pub fn empirical_convolution_direct(mu: &EmpiricalMeasure, v: &GridFunction) -> Result<GridFunction> {
    let grid = *v.grid();
    if grid.dim() != mu.dim {
        return Err(Error::GridMismatch("measure and kernel dimensions differ".into()));
    }
    let d = grid.dim();
    let w = mu.weight();
    let mut p = [0.0; 3];
    let mut shifted = [0.0; 3];
    let values = (0..grid.len())
        .map(|idx| {
            grid.point_of(idx, &mut p);
            let mut acc = 0.0;
            for x in mu.positions.chunks_exact(d) {
                for a in 0..d {
                    shifted[a] = p[a] - x[a];
                }
                acc += v.evaluate_at(&shifted[..d]);
            }
            acc * w
        })
        .collect();
    GridFunction::new(grid, values)
}

/// State of the coupled systems `(X, Y)` for one replica.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    x: Vec<f64>,
    y: Vec<f64>,
    brownian: Vec<f64>,
    noise: Vec<f64>,
    streams: Vec<Stream>,
    grid: Grid,
    sigma: f64,
    dt: f64,
    step: usize,
    noise_pending: bool,
    boundary_margin: f64,
    boundary_hits: u64,
    running_max_coupling: f64,
}

impl ParticleEnsemble {
    /// Both systems start at `initial`. `epsilon` sets the boundary-proximity margin `4ε`.
    pub fn new(initial: Vec<f64>, cfg: &SdeConfig, grid: Grid, epsilon: f64) -> Result<Self> {
        let ids: Vec<u64> = (0..initial.len() as u64).collect();
        Self::with_streams(initial, &ids, cfg, grid, epsilon)
    }

    /// Like [`new`](Self::new) with explicit Brownian stream indices per particle.
    pub fn with_streams(initial: Vec<f64>, stream_ids: &[u64], cfg: &SdeConfig, grid: Grid, epsilon: f64) -> Result<Self> {
        cfg.validate()?;
        if grid.dim() != 1 {
            return Err(invalid("particle dynamics are one-dimensional"));
        }
        if initial.len() != cfg.n_particles || stream_ids.len() != initial.len() {
            return Err(invalid(format!(
                "expected {} particles and stream ids, got {} and {}",
                cfg.n_particles,
                initial.len(),
                stream_ids.len()
            )));
        }
        if initial.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("initial positions".into()));
        }
        let initial: Vec<f64> = initial.into_iter().map(|x| grid.wrap(x)).collect();
        let n = initial.len();
        Ok(Self {
            y: initial.clone(),
            x: initial,
            brownian: vec![0.0; n],
            noise: vec![0.0; n],
            streams: stream_ids
                .iter()
                .map(|&i| Stream::new(cfg.seed, cfg.replica, Domain::Brownian, i))
                .collect(),
            grid,
            sigma: cfg.sigma,
            dt: cfg.dt,
            step: 0,
            noise_pending: false,
            boundary_margin: 4.0 * epsilon,
            boundary_hits: 0,
            running_max_coupling: 0.0,
        })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Accumulated Brownian paths `B^i(t)` (unscaled by σ).
    pub fn brownian(&self) -> &[f64] {
        &self.brownian
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn boundary_hits(&self) -> u64 {
        self.boundary_hits
    }

    pub fn running_max_coupling(&self) -> f64 {
        self.running_max_coupling
    }

    pub fn empirical_x(&self) -> EmpiricalMeasure {
        EmpiricalMeasure {
            positions: self.x.clone(),
            dim: 1,
        }
    }

    pub fn empirical_y(&self) -> EmpiricalMeasure {
        EmpiricalMeasure {
            positions: self.y.clone(),
            dim: 1,
        }
    }

    fn periodic_distance(&self, a: f64, b: f64) -> f64 {
        let p = 2.0 * self.grid.half_width();
        let d = (a - b).abs() % p;
        d.min(p - d)
    }

    /// `max_i |X^i − Y^i|` (periodic distance) at the current time.
    pub fn coupling_distance(&self) -> f64 {
        self.x
            .iter()
            .zip(&self.y)
            .fold(0.0, |m, (&a, &b)| m.max(self.periodic_distance(a, b)))
    }

    /// Folds the current coupling distance into the running maximum and returns it.
    pub fn update_coupling(&mut self) -> f64 {
        self.running_max_coupling = self.running_max_coupling.max(self.coupling_distance());
        self.running_max_coupling
    }

    fn count_boundary(&mut self, which: bool) {
        let l = self.grid.half_width();
        let lo = -l + self.boundary_margin;
        let hi = l - self.boundary_margin;
        let pos = if which { &self.x } else { &self.y };
        let hits = pos.iter().filter(|&&p| !(p >= lo && p < hi)).count() as u64;
        self.boundary_hits += hits;
    }

    /// Draws this step's increments and advances `X`. Must precede
    /// [`step_meanfield`](Self::step_meanfield) in every step.
    pub fn step_interacting(&mut self, table: &KernelTable) {
        for (z, s) in self.noise.iter_mut().zip(self.streams.iter_mut()) {
            *z = s.normal();
        }
        let drift = pair_drift(&self.x, table);
        let amp = self.sigma * self.dt.sqrt();
        for ((x, d), z) in self.x.iter_mut().zip(&drift).zip(&self.noise) {
            *x = self.grid.wrap(*x - self.dt * d + amp * z);
        }
        self.noise_pending = true;
        self.count_boundary(true);
    }

    /// Advances `Y` with the drift `−field(Y)` and the increments recorded by
    /// [`step_interacting`](Self::step_interacting). `field_time` is the time of the slice
    /// `k^ε * ρ^ε_t` and must match the particle clock within `dt/2`.
    pub fn step_meanfield(&mut self, field: &GridFunction, field_time: f64) -> Result<()> {
        if !self.noise_pending {
            return Err(invalid("step_interacting must run before step_meanfield in each step"));
        }
        let clock = self.time();
        if (field_time - clock).abs() > self.dt / 2.0 {
            return Err(Error::TimeMismatch { field_time, clock });
        }
        if field.grid() != &self.grid {
            return Err(Error::GridMismatch("force field grid differs from particle grid".into()));
        }
        let amp = self.sigma * self.dt.sqrt();
        let sq = self.dt.sqrt();
        for i in 0..self.y.len() {
            let drift = field.evaluate_at(&[self.y[i]]);
            self.y[i] = self.grid.wrap(self.y[i] - self.dt * drift + amp * self.noise[i]);
            self.brownian[i] += sq * self.noise[i];
        }
        self.noise_pending = false;
        self.step += 1;
        self.count_boundary(false);
        Ok(())
    }

    /// Appends rows `replica,t,i,X,Y`.
    pub fn write_snapshot<W: Write>(&self, mut w: W, replica: u64) -> Result<()> {
        let t = self.time();
        for (i, (x, y)) in self.x.iter().zip(&self.y).enumerate() {
            writeln!(w, "{replica},{t:e},{i},{x:e},{y:e}")?;
        }
        Ok(())
    }
}

pub const SNAPSHOT_HEADER: &str = "replica,t,i,X,Y";
