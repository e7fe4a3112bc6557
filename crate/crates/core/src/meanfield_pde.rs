//! Grid solvers for the regularized aggregation-diffusion equation
//! `∂_t ρ = (σ²/2) ∂_xx ρ + ∂_x(ρ · k*ρ)` in 1D and for the two-particle Liouville equation
//! on the plane.
//!
//! Both use Strang splitting: a spectral heat half-step, a conservative MUSCL transport step
//! (van Leer limiter, SSP-RK2 in time), and a second heat half-step.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::gridfn::{FourierMultiplier, Grid, GridFunction, Tolerances};
use crate::kernels::KernelPair;
use crate::numerics::compensated_sum;

/// Fraction of the CFL limit used when a driver picks its own substeps.
const CFL_SAFETY: f64 = 0.9;

#[inline]
fn van_leer(a: f64, b: f64) -> f64 {
    if a * b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}

/// Adds `−∂_x(ρ a)` along one periodic line to `out`. `start`, `stride` address the line in
/// the flat arrays.
fn transport_line(rho: &[f64], a: &[f64], n: usize, start: usize, stride: usize, inv_h: f64, out: &mut [f64]) {
    let at = |j: usize| start + (j % n) * stride;
    let slope = |j: usize| {
        let jm = at(j + n - 1);
        let j0 = at(j);
        let jp = at(j + 1);
        van_leer(rho[j0] - rho[jm], rho[jp] - rho[j0])
    };
    // flux through the face j + 1/2
    let flux = |j: usize, s_j: f64, s_jp: f64| {
        let (j0, jp) = (at(j), at(j + 1));
        let af = 0.5 * (a[j0] + a[jp]);
        if af >= 0.0 {
            af * (rho[j0] + 0.5 * s_j)
        } else {
            af * (rho[jp] - 0.5 * s_jp)
        }
    };
    let s0 = slope(0);
    let mut f_prev = {
        let s_last = slope(n - 1);
        flux(n - 1, s_last, s0)
    };
    let mut s_j = s0;
    for j in 0..n {
        let s_jp = if j + 1 == n { s0 } else { slope(j + 1) };
        let f = flux(j, s_j, s_jp);
        out[at(j)] -= (f - f_prev) * inv_h;
        f_prev = f;
        s_j = s_jp;
    }
}

/// `−div(ρ a)` on a periodic grid of dimension 1 or 2; `a[axis]` holds the velocity component.
fn transport_rhs(grid: &Grid, rho: &[f64], a: &[Vec<f64>]) -> Vec<f64> {
    let n = grid.n();
    let inv_h = 1.0 / grid.spacing();
    let mut out = vec![0.0; rho.len()];
    match grid.dim() {
        1 => transport_line(rho, &a[0], n, 0, 1, inv_h, &mut out),
        2 => {
            // the axis-0 and axis-1 contributions are accumulated separately and summed once,
            // so that the update at (i, j) and (j, i) performs the same operations
            let mut d0 = vec![0.0; rho.len()];
            for j in 0..n {
                transport_line(rho, &a[0], n, j, n, inv_h, &mut d0);
            }
            let mut d1 = vec![0.0; rho.len()];
            for i in 0..n {
                transport_line(rho, &a[1], n, i * n, 1, inv_h, &mut d1);
            }
            for ((o, x), y) in out.iter_mut().zip(&d0).zip(&d1) {
                *o = x + y;
            }
        }
        _ => unreachable!("transport is implemented for d ≤ 2"),
    }
    out
}

fn admissible_dt(grid: &Grid, a: &[Vec<f64>]) -> f64 {
    let vmax = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if vmax == 0.0 {
        f64::INFINITY
    } else {
        grid.spacing() / (2.0 * vmax)
    }
}

fn heat(rho: &GridFunction, sigma: f64, dt: f64) -> Result<GridFunction> {
    if sigma == 0.0 || dt == 0.0 {
        return Ok(rho.clone());
    }
    rho.apply_multiplier(&FourierMultiplier::heat(0.5 * sigma * sigma * dt))
}

/// Clips negative undershoot and restores unit mass; returns `(|mass − 1| before, clipped)`.
fn restore_density(rho: &mut GridFunction, what: &str) -> Result<(f64, bool)> {
    let clipped = rho.min() < 0.0;
    let drift = rho.normalize_density()?.abs();
    if drift > 1e-12 {
        log::warn!("{what}: mass drift {drift:e} in one step before renormalization");
    }
    if clipped {
        log::debug!("{what}: negative undershoot clipped");
    }
    Ok((drift, clipped))
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

/// The state of the 1D mean-field density `ρ^ε` together with its interaction force.
#[derive(Debug, Clone)]
pub struct PdeState {
    rho: GridFunction,
    t: f64,
    sigma: f64,
    force: GridFunction,
    renormalization: f64,
    clip_events: usize,
}

impl PdeState {
    /// `force` is `k` sampled on the grid of `rho`; use [`from_pair`](Self::from_pair) for a
    /// regularized pair.
    pub fn new(rho: GridFunction, sigma: f64, force: GridFunction, tol: &Tolerances) -> Result<Self> {
        if rho.grid().dim() != 1 {
            return Err(invalid("the mean-field solver is one-dimensional"));
        }
        rho.grid().ensure_same(force.grid())?;
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(invalid(format!("sigma must be nonnegative, got {sigma}")));
        }
        rho.check_density(tol)?;
        Ok(Self {
            rho,
            t: 0.0,
            sigma,
            force,
            renormalization: 0.0,
            clip_events: 0,
        })
    }

    pub fn from_pair(rho: GridFunction, sigma: f64, pair: &KernelPair, tol: &Tolerances) -> Result<Self> {
        Self::new(rho, sigma, pair.force().clone(), tol)
    }

    pub fn rho(&self) -> &GridFunction {
        &self.rho
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn force(&self) -> &GridFunction {
        &self.force
    }

    /// Accumulated `|mass − 1|` removed by renormalization.
    pub fn renormalization(&self) -> f64 {
        self.renormalization
    }

    pub fn clip_events(&self) -> usize {
        self.clip_events
    }

    /// The mean-field drift `k * ρ` at the current time.
    pub fn field(&self) -> Result<GridFunction> {
        self.force.convolve(&self.rho)
    }

    fn velocity(&self, rho: &GridFunction) -> Result<Vec<f64>> {
        Ok(self.force.convolve(rho)?.into_values().into_iter().map(|v| -v).collect())
    }

    /// Largest step admitted by the transport CFL condition at the current state.
    pub fn admissible_dt(&self) -> Result<f64> {
        Ok(admissible_dt(self.rho.grid(), &[self.velocity(&self.rho)?]))
    }

    /// One Strang step of length `dt`.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        check_dt(dt)?;
        let grid = *self.rho.grid();
        let half = heat(&self.rho, self.sigma, dt / 2.0)?;
        let a0 = self.velocity(&half)?;
        let admissible = admissible_dt(&grid, std::slice::from_ref(&a0));
        if dt > admissible {
            return Err(Error::Cfl { dt, admissible_dt: admissible });
        }
        let r0 = half.values();
        let l0 = transport_rhs(&grid, r0, std::slice::from_ref(&a0));
        let r1: Vec<f64> = r0.iter().zip(&l0).map(|(r, l)| r + dt * l).collect();
        let stage = GridFunction::new(grid, r1)?;
        let a1 = self.velocity(&stage)?;
        let l1 = transport_rhs(&grid, stage.values(), std::slice::from_ref(&a1));
        let r2: Vec<f64> = r0
            .iter()
            .zip(stage.values())
            .zip(&l1)
            .map(|((r0, r1), l)| 0.5 * r0 + 0.5 * (r1 + dt * l))
            .collect();
        let mut rho = heat(&GridFunction::new(grid, r2)?, self.sigma, dt / 2.0)?;
        let (drift, clipped) = restore_density(&mut rho, "pde_step")?;
        self.renormalization += drift;
        self.clip_events += clipped as usize;
        self.rho = rho;
        self.t += dt;
        Ok(())
    }

    /// Steps until `t_target`, never exceeding `max_dt` or a safety fraction of the CFL limit.
    /// Returns the number of steps taken.
    pub fn advance_to(&mut self, t_target: f64, max_dt: f64) -> Result<usize> {
        check_dt(max_dt)?;
        let mut steps = 0;
        while t_target - self.t > 1e-12 * t_target.abs().max(1.0) {
            let remaining = t_target - self.t;
            let dt = remaining.min(max_dt).min(CFL_SAFETY * self.admissible_dt()?);
            self.step(dt)?;
            if dt == remaining {
                self.t = t_target;
            }
            steps += 1;
        }
        self.t = self.t.max(t_target);
        Ok(steps)
    }
}

/// Functional form of [`PdeState::step`].
pub fn pde_step(state: &PdeState, dt: f64) -> Result<PdeState> {
    let mut next = state.clone();
    next.step(dt)?;
    Ok(next)
}

/// The joint density of two particles on a 2D grid.
#[derive(Debug, Clone)]
pub struct LiouvilleState2 {
    rho2: GridFunction,
    t: f64,
    renormalization: f64,
}

impl LiouvilleState2 {
    pub fn new(rho2: GridFunction, tol: &Tolerances) -> Result<Self> {
        if rho2.grid().dim() != 2 {
            return Err(invalid("the Liouville state lives on a 2D grid"));
        }
        rho2.check_density(tol)?;
        Ok(Self {
            rho2,
            t: 0.0,
            renormalization: 0.0,
        })
    }

    /// Starts from `ρ₀ ⊗ ρ₀`.
    pub fn from_initial(rho0: &GridFunction, tol: &Tolerances) -> Result<Self> {
        Self::new(tensor_product(rho0, rho0)?, tol)
    }

    pub fn rho2(&self) -> &GridFunction {
        &self.rho2
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn renormalization(&self) -> f64 {
        self.renormalization
    }

    /// `max |ρ(x₁, x₂) − ρ(x₂, x₁)|`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.rho2.grid().n();
        let v = self.rho2.values();
        let mut m = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                m = m.max((v[i * n + j] - v[j * n + i]).abs());
            }
        }
        m
    }

    /// One Strang step; the drift of each coordinate is `(k(0) + k(x_i − x_j)) / 2`.
    pub fn step(&mut self, velocity: &LiouvilleVelocity, sigma: f64, dt: f64) -> Result<()> {
        check_dt(dt)?;
        let grid = *self.rho2.grid();
        grid.ensure_same(&velocity.grid)?;
        if dt > velocity.admissible_dt {
            return Err(Error::Cfl {
                dt,
                admissible_dt: velocity.admissible_dt,
            });
        }
        let half = heat(&self.rho2, sigma, dt / 2.0)?;
        let r0 = half.values();
        let l0 = transport_rhs(&grid, r0, &velocity.a);
        let r1: Vec<f64> = r0.iter().zip(&l0).map(|(r, l)| r + dt * l).collect();
        let l1 = transport_rhs(&grid, &r1, &velocity.a);
        let r2: Vec<f64> = r0
            .iter()
            .zip(&r1)
            .zip(&l1)
            .map(|((r0, r1), l)| 0.5 * r0 + 0.5 * (r1 + dt * l))
            .collect();
        let mut rho2 = heat(&GridFunction::new(grid, r2)?, sigma, dt / 2.0)?;
        let (drift, _) = restore_density(&mut rho2, "liouville2_step")?;
        self.renormalization += drift;
        self.rho2 = rho2;
        self.t += dt;
        Ok(())
    }

    pub fn advance_to(&mut self, velocity: &LiouvilleVelocity, sigma: f64, t_target: f64, max_dt: f64) -> Result<usize> {
        check_dt(max_dt)?;
        let mut steps = 0;
        while t_target - self.t > 1e-12 * t_target.abs().max(1.0) {
            let remaining = t_target - self.t;
            let dt = remaining.min(max_dt).min(CFL_SAFETY * velocity.admissible_dt);
            self.step(velocity, sigma, dt)?;
            if dt == remaining {
                self.t = t_target;
            }
            steps += 1;
        }
        Ok(steps)
    }
}

/// The (time-independent) transport velocity of the two-particle Liouville equation.
#[derive(Debug, Clone)]
pub struct LiouvilleVelocity {
    grid: Grid,
    a: Vec<Vec<f64>>,
    admissible_dt: f64,
}

impl LiouvilleVelocity {
    /// Builds the velocity on the 2D grid matching the 1D grid of `force`.
    pub fn new(force: &GridFunction) -> Result<Self> {
        let g1 = *force.grid();
        if g1.dim() != 1 {
            return Err(invalid("the Liouville velocity needs a 1D force"));
        }
        let grid = g1.with_dim(2)?;
        let n = g1.n();
        let o = g1.origin_index();
        let k = force.values();
        let k0 = k[o];
        // x_i − x_j is the node (o + i − j) mod n
        let kd = |i: usize, j: usize| k[(o + i + n - j) % n];
        let mut a0 = vec![0.0; n * n];
        let mut a1 = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a0[i * n + j] = -0.5 * (k0 + kd(i, j));
                a1[i * n + j] = -0.5 * (k0 + kd(j, i));
            }
        }
        let a = vec![a0, a1];
        let admissible_dt = admissible_dt(&grid, &a);
        Ok(Self { grid, a, admissible_dt })
    }

    pub fn from_pair(pair: &KernelPair) -> Result<Self> {
        Self::new(pair.force())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn admissible_dt(&self) -> f64 {
        self.admissible_dt
    }
}

/// Functional form of [`LiouvilleState2::step`].
pub fn liouville2_step(state: &LiouvilleState2, pair: &KernelPair, sigma: f64, dt: f64) -> Result<LiouvilleState2> {
    let velocity = LiouvilleVelocity::from_pair(pair)?;
    let mut next = state.clone();
    next.step(&velocity, sigma, dt)?;
    Ok(next)
}

/// `(x₁, x₂) ↦ a(x₁) b(x₂)` on the 2D grid with the same axis.
pub fn tensor_product(a: &GridFunction, b: &GridFunction) -> Result<GridFunction> {
    a.grid().ensure_same(b.grid())?;
    if a.grid().dim() != 1 {
        return Err(invalid("tensor products are formed from 1D functions"));
    }
    let grid = a.grid().with_dim(2)?;
    let values = a
        .values()
        .iter()
        .flat_map(|x| b.values().iter().map(move |y| x * y))
        .collect();
    GridFunction::new(grid, values)
}

/// First marginal `x₁ ↦ ∫ ρ(x₁, x₂) dx₂`.
pub fn marginal(rho2: &LiouvilleState2) -> Result<GridFunction> {
    marginal_of(rho2.rho2(), 0)
}

/// Marginal of a 2D function onto `axis` (0 keeps `x₁`, 1 keeps `x₂`).
pub fn marginal_of(f: &GridFunction, axis: usize) -> Result<GridFunction> {
    let g2 = *f.grid();
    if g2.dim() != 2 || axis > 1 {
        return Err(invalid("marginals are taken of 2D functions along axis 0 or 1"));
    }
    let n = g2.n();
    let h = g2.spacing();
    let v = f.values();
    let values = (0..n)
        .map(|i| {
            let line = (0..n).map(|j| if axis == 0 { v[i * n + j] } else { v[j * n + i] });
            h * compensated_sum(line)
        })
        .collect();
    GridFunction::new(g2.with_dim(1)?, values)
}

/// `∫ p log(p / q)`. Cells with `p ≤ tol.neg` contribute nothing; `q` is floored at
/// `1e−30 · max q` wherever `p` is present.
pub fn relative_entropy(p: &GridFunction, q: &GridFunction) -> Result<f64> {
    relative_entropy_with(p, q, &Tolerances::default())
}

pub fn relative_entropy_with(p: &GridFunction, q: &GridFunction, tol: &Tolerances) -> Result<f64> {
    p.grid().ensure_same(q.grid())?;
    let floor = 1e-30 * q.max().max(0.0);
    let mut floored = 0usize;
    let terms = p.values().iter().zip(q.values()).map(|(&pv, &qv)| {
        if pv <= tol.neg {
            return 0.0;
        }
        let qv = if qv <= floor {
            floored += 1;
            floor
        } else {
            qv
        };
        if qv <= 0.0 {
            // q vanishes identically; the divergence is infinite
            return f64::INFINITY;
        }
        pv * (pv / qv).ln()
    });
    let terms: Vec<f64> = terms.collect();
    if floored > 0 {
        log::debug!("relative_entropy: {floored} cells floored");
    }
    Ok(p.grid().cell_volume() * compensated_sum(terms))
}

/// `∫ |p − q|`.
pub fn l1_distance(p: &GridFunction, q: &GridFunction) -> Result<f64> {
    p.grid().ensure_same(q.grid())?;
    Ok(p.grid().cell_volume() * compensated_sum(p.values().iter().zip(q.values()).map(|(a, b)| (a - b).abs())))
}

/// `∫∫ |k − k_ε|²(x₁ − x₂) ρ(x₁) ρ(x₂)`, via the autocorrelation `ρ * ρ(−·)`.
pub fn deregularization_residual(k: &GridFunction, k_eps: &GridFunction, rho: &GridFunction) -> Result<f64> {
    if rho.grid().dim() != 1 {
        return Err(invalid("deregularization residual is computed in 1D"));
    }
    let d2 = k.zip_with(k_eps, |a, b| (a - b) * (a - b))?;
    let auto = rho.convolve(&rho.reflect())?;
    d2.inner(&auto)
}

/// One row of a PDE time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeSeriesRow {
    pub t: f64,
    pub mass: f64,
    pub min: f64,
    pub entropy_vs_reference: f64,
    pub l1_vs_reference: f64,
}

impl PdeSeriesRow {
    pub fn new(rho: &GridFunction, t: f64, reference: &GridFunction) -> Result<Self> {
        Ok(Self {
            t,
            mass: rho.quadrature(),
            min: rho.min(),
            entropy_vs_reference: relative_entropy(rho, reference)?,
            l1_vs_reference: l1_distance(rho, reference)?,
        })
    }
}

pub const SERIES_HEADER: &str = "t,mass,min,entropy_vs_reference,l1_vs_reference";

pub fn write_series<W: Write>(mut w: W, rows: &[PdeSeriesRow]) -> Result<()> {
    writeln!(w, "{SERIES_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{:e},{:e},{:e},{:e},{:e}",
            r.t, r.mass, r.min, r.entropy_vs_reference, r.l1_vs_reference
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
