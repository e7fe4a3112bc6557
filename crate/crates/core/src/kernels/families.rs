//! Bounded-confidence, Coulomb (Keller–Segel) and Bessel-potential kernels.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{make_cutoff, make_mollifier, KernelPair, MollifierBase, MollifierSpec, PairMode, PairSpec};
use crate::error::{invalid, Error, Result};
use crate::gridfn::{FourierMultiplier, Grid, GridFunction, Spectrum};
use crate::numerics::gamma;

fn require_1d(grid: &Grid, what: &str) -> Result<()> {
    if grid.dim() != 1 {
        return Err(invalid(format!("{what} is defined in one dimension only")));
    }
    Ok(())
}

fn check_radius(r: f64, grid: &Grid) -> Result<()> {
    if !(r > 0.0 && r < grid.half_width() / 2.0) {
        return Err(invalid(format!(
            "confidence radius must lie in (0, L/2) = (0, {}), got {r}",
            grid.half_width() / 2.0
        )));
    }
    Ok(())
}

/// Opinion-dynamics potential: `−x−R` on `[−R,0]`, `x−R` on `(0,R]`, 0 outside.
pub fn bounded_confidence_potential(r: f64, grid: Grid) -> Result<GridFunction> {
    require_1d(&grid, "the bounded-confidence potential")?;
    check_radius(r, &grid)?;
    GridFunction::from_fn(grid, |x| {
        let x = x[0];
        if (-r..=0.0).contains(&x) {
            -x - r
        } else if x > 0.0 && x <= r {
            x - r
        } else {
            0.0
        }
    })
}

/// `k_U = U'`: −1 on `[−R,0)`, +1 on `(0,R]`, 0 at the origin and outside.
pub fn bounded_confidence_force(r: f64, grid: Grid) -> Result<GridFunction> {
    require_1d(&grid, "the bounded-confidence force")?;
    check_radius(r, &grid)?;
    GridFunction::from_fn(grid, |x| {
        let x = x[0];
        if (-r..0.0).contains(&x) {
            -1.0
        } else if x > 0.0 && x <= r {
            1.0
        } else {
            0.0
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundedConfidenceRoute {
    /// `W^ε = ζ^ε (k_U * J^ε)`, `V^ε = J^ε`, product mode.
    Force,
    /// `W^ε = V^ε = 1_{[−R/2,R/2]} * J^ε`, `k^ε = −∇(V^ε * V^ε)`.
    Potential,
}

/// Mollified bounded-confidence kernel. Both routes approximate `k_U`, whose sign makes
/// `dX^i = −(1/N) Σ_j k(X^i − X^j) dt` pull agents together (consensus formation).
pub fn bounded_confidence_pair(
    r: f64,
    epsilon: f64,
    grid: Grid,
    route: BoundedConfidenceRoute,
) -> Result<KernelPair> {
    require_1d(&grid, "the bounded-confidence pair")?;
    check_radius(r, &grid)?;
    let j = make_mollifier(MollifierSpec::bump(epsilon), grid)?;
    match route {
        BoundedConfidenceRoute::Force => {
            let k = bounded_confidence_force(r, grid)?;
            let w = k.convolve(&j)?.mul(&make_cutoff(epsilon, grid)?)?;
            KernelPair::new(
                w,
                Some(j),
                PairSpec {
                    mode: PairMode::Product,
                    sign: 1.0,
                    epsilon,
                    a_w: 0.0,
                    a_v: 2.5,
                    strongly_admissible: false,
                    label: "bounded_confidence/force".into(),
                },
            )
        }
        BoundedConfidenceRoute::Potential => {
            let ind = GridFunction::from_fn(grid, |x| if x[0].abs() <= r / 2.0 { 1.0 } else { 0.0 })?;
            let v = ind.convolve(&j)?;
            KernelPair::new(
                v,
                None,
                PairSpec {
                    mode: PairMode::GradientProduct,
                    sign: -1.0,
                    epsilon,
                    a_w: 1.5,
                    a_v: 1.5,
                    strongly_admissible: true,
                    label: "bounded_confidence/potential".into(),
                },
            )
        }
    }
}

/// `c_α = π^{−α/2} Γ(α/2)`.
pub fn riesz_constant(alpha: f64) -> f64 {
    PI.powf(-alpha / 2.0) * gamma(alpha / 2.0)
}

fn unit_ball_volume(d: usize) -> f64 {
    PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0 + 1.0)
}

/// `sqrt(c₂ / (c_{d−2} d (d−2) |B₁|))`, the factor turning `|ξ|^{-1}` into the square root
/// of the Newtonian symbol. Equals `1/(2π)` in three dimensions.
pub fn coulomb_sqrt_constant(d: usize) -> Result<f64> {
    if d < 3 {
        return Err(invalid(format!("the factorized Coulomb potential needs d >= 3, got {d}")));
    }
    let df = d as f64;
    Ok((riesz_constant(2.0) / (riesz_constant(df - 2.0) * df * (df - 2.0) * unit_ball_volume(d))).sqrt())
}

fn coulomb_value(d: usize, r: f64) -> f64 {
    if d == 2 {
        -r.ln() / (2.0 * PI)
    } else {
        let df = d as f64;
        1.0 / (df * (df - 2.0) * unit_ball_volume(d) * r.powf(df - 2.0))
    }
}

/// Newtonian potential: `−log|x|/2π` (d=2), `1/(d(d−2)|B₁||x|^{d−2})` (d=3).
/// The origin node holds the average of its `2d` nearest neighbours.
pub fn coulomb_potential(grid: Grid) -> Result<GridFunction> {
    let d = grid.dim();
    if d < 2 {
        return Err(invalid("the Coulomb potential is defined for d = 2, 3"));
    }
    let mut phi = GridFunction::from_fn(grid, |x| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            0.0
        } else {
            coulomb_value(d, r)
        }
    })?;
    let o = grid.origin_index();
    let mut acc = 0.0;
    for axis in 0..d {
        for step in [o - 1, o + 1] {
            let mut m = [o; 3];
            m[axis] = step;
            acc += phi.values()[grid.ravel(&m[..d])];
        }
    }
    let origin = grid.origin_flat();
    phi.values_mut()[origin] = acc / (2 * d) as f64;
    Ok(phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "route", content = "base")]
pub enum CoulombRoute {
    /// `W^ε = J_KS * Φ`, `V^ε = J_KS` with `J_KS` a bump of radius `ε/2`.
    MollifyBoth,
    /// `V^ε = c F^{-1}[|ξ|^{-1} F(J^ε)^{1/2}]` with the mollifier transform computed numerically.
    FourierSqrt(MollifierBase),
    /// `V^ε = c F^{-1}[|ξ|^{-1} exp(−2επ²|ξ|²)]`, the closed-form square root of the heat kernel.
    WeierstrassSqrt,
}

/// Keller–Segel kernel `k^ε = −∇Φ^ε` (aggregating).
pub fn coulomb_factorized_pair(epsilon: f64, grid: Grid, route: CoulombRoute) -> Result<KernelPair> {
    let d = grid.dim();
    if d < 2 {
        return Err(invalid("the Coulomb kernel is defined for d = 2, 3"));
    }
    let spec = |a_w: f64, a_v: f64, strong: bool, label: &str| PairSpec {
        mode: PairMode::GradientProduct,
        sign: -1.0,
        epsilon,
        a_w,
        a_v,
        strongly_admissible: strong,
        label: label.into(),
    };
    let sqrt_a = (d as f64 + 2.0) / 4.0;
    match route {
        CoulombRoute::MollifyBoth => {
            let j = make_mollifier(MollifierSpec::bump(epsilon / 2.0), grid)?;
            let w = j.convolve(&coulomb_potential(grid)?)?;
            KernelPair::new(w, Some(j), spec(0.0, d as f64 / 2.0 + 2.0, false, "coulomb/mollify_both"))
        }
        CoulombRoute::WeierstrassSqrt => {
            let c = coulomb_sqrt_constant(d)?;
            let m = FourierMultiplier::real(move |xi| {
                let r2: f64 = xi.iter().map(|v| v * v).sum();
                if r2 == 0.0 {
                    0.0
                } else {
                    c * (-2.0 * epsilon * PI * PI * r2).exp() / r2.sqrt()
                }
            });
            let v = Spectrum::from_symbol(grid, &m)?.to_real()?;
            KernelPair::new(v, None, spec(sqrt_a, sqrt_a, true, "coulomb/weierstrass_sqrt"))
        }
        CoulombRoute::FourierSqrt(base) => {
            let c = coulomb_sqrt_constant(d)?;
            let j = make_mollifier(MollifierSpec { base, epsilon }, grid)?;
            let mut s = sqrt_symbol(&j)?;
            s.apply(&FourierMultiplier::inverse_abs())?;
            let v = s.to_real()?.scale(c)?;
            KernelPair::new(v, None, spec(sqrt_a, sqrt_a, true, "coulomb/fourier_sqrt"))
        }
    }
}

/// Relative L² distance between `V^ε * V^ε` (sign applied) and `Φ * h^ε` computed by direct
/// convolution of the sampled potential with the sampled heat kernel. The periodic grid only
/// determines the potential up to a constant and a smooth far-field correction, so both are
/// compared on the ball `|x| ≤ L/2` after removing their mean difference there.
/// Meaningful for the heat-kernel routes, whose product is exactly `Φ * h^ε`.
pub fn coulomb_factorization_residual(pair: &KernelPair) -> Result<f64> {
    let grid = *pair.grid();
    let phi = coulomb_potential(grid)?.convolve(&make_mollifier(MollifierSpec::gaussian(pair.epsilon()), grid)?)?;
    let vv = pair.product()?.scale(pair.sign())?;
    let radius2 = (grid.half_width() / 2.0).powi(2);
    let mut x = [0.0; 3];
    let inside: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            grid.point_of(i, &mut x);
            x[..grid.dim()].iter().map(|v| v * v).sum::<f64>() <= radius2
        })
        .collect();
    let diff = |i: usize| vv.values()[i] - phi.values()[i];
    let shift = inside.iter().map(|&i| diff(i)).sum::<f64>() / inside.len() as f64;
    let num: f64 = inside.iter().map(|&i| (diff(i) - shift).powi(2)).sum();
    let den: f64 = inside.iter().map(|&i| phi.values()[i].powi(2)).sum();
    Ok((num / den).sqrt())
}

/// Pointwise square root of a mollifier's transform. Round-off negatives down to
/// `−1e−8 · max` (sampling and truncation noise) are clamped to 0; anything more negative is an error.
pub fn sqrt_symbol(j: &GridFunction) -> Result<Spectrum> {
    let mut s = Spectrum::of(j);
    let grid = *s.grid();
    let peak = s.coeffs().iter().fold(0.0f64, |m, c| m.max(c.re.abs()));
    let mut xi = [0.0; 3];
    for (idx, c) in s.coeffs_mut().iter_mut().enumerate() {
        if c.re < -1e-8 * peak {
            grid.frequency_of(idx, &mut xi);
            return Err(Error::NegativeSymbol {
                frequency: xi[..grid.dim()].to_vec(),
                value: c.re,
            });
        }
        *c = c.re.max(0.0).sqrt().into();
    }
    Ok(s)
}

/// `G = F^{-1}[(1+4π²|ξ|²)^{-1}]`, the kernel of `(I − Δ)^{-1}`.
pub fn bessel_kernel(grid: Grid) -> Result<GridFunction> {
    Spectrum::from_symbol(grid, &FourierMultiplier::bessel(-2.0))?.to_real()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BesselRoute {
    /// `V^ε = F^{-1}[(1+4π²|ξ|²)^{-1/2} exp(−2επ²|ξ|²)] = W^ε`, so `V^ε * V^ε = G * h^ε`.
    Weierstrass,
    /// `W^ε = G * J^ε`, `V^ε = J^ε` (standard bump).
    Mollifier,
}

/// Chemotactic kernel `k^ε = −∇G^ε` (aggregating).
pub fn bessel_pair(epsilon: f64, grid: Grid, route: BesselRoute) -> Result<KernelPair> {
    let d = grid.dim() as f64;
    match route {
        BesselRoute::Weierstrass => {
            let m = FourierMultiplier::real(move |xi| {
                let r2: f64 = xi.iter().map(|v| v * v).sum();
                (1.0 + 4.0 * PI * PI * r2).powf(-0.5) * (-2.0 * epsilon * PI * PI * r2).exp()
            });
            let v = Spectrum::from_symbol(grid, &m)?.to_real()?;
            let a = (d + 2.0) / 4.0;
            KernelPair::new(
                v,
                None,
                PairSpec {
                    mode: PairMode::GradientProduct,
                    sign: -1.0,
                    epsilon,
                    a_w: a,
                    a_v: a,
                    strongly_admissible: true,
                    label: "bessel/weierstrass".into(),
                },
            )
        }
        BesselRoute::Mollifier => {
            let j = make_mollifier(MollifierSpec::bump(epsilon), grid)?;
            let w = bessel_kernel(grid)?.convolve(&j)?;
            KernelPair::new(
                w,
                Some(j),
                PairSpec {
                    mode: PairMode::GradientProduct,
                    sign: -1.0,
                    epsilon,
                    a_w: 0.0,
                    a_v: d / 2.0 + 2.0,
                    strongly_admissible: false,
                    label: "bessel/mollifier".into(),
                },
            )
        }
    }
}
