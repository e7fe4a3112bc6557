//! Mollifiers, cut-offs, admissible kernel pairs `(W^ε, V^ε)` and the interaction kernel families.

mod families;

pub use families::*;

use std::f64::consts::PI;
use std::sync::OnceLock;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gridfn::{FourierMultiplier, Grid, GridFunction, Norm, Spectrum};
use crate::numerics::{fit_line, LineFit};

/// Minimum support radius of the standard bump, in grid spacings.
pub const BUMP_MIN_SPACINGS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MollifierBase {
    /// `c·exp(−1/(1−|x|²))` on the unit ball.
    StandardBump,
    /// The heat kernel `(4πε)^{−d/2} exp(−|x|²/4ε)`; `ε` plays the role of a time.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub base: MollifierBase,
    pub epsilon: f64,
}

impl MollifierSpec {
    pub fn bump(epsilon: f64) -> Self {
        Self {
            base: MollifierBase::StandardBump,
            epsilon,
        }
    }

    pub fn gaussian(epsilon: f64) -> Self {
        Self {
            base: MollifierBase::Gaussian,
            epsilon,
        }
    }
}

fn bump_profile(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// `∫_{B₁} exp(−1/(1−|x|²)) dx` in dimension `dim`, by composite Simpson on the radius.
fn bump_integral(dim: usize) -> f64 {
    const STEPS: usize = 20_000;
    let dr = 1.0 / STEPS as f64;
    let shell = |r: f64| -> f64 {
        let area = match dim {
            1 => 2.0,
            2 => 2.0 * PI * r,
            _ => 4.0 * PI * r * r,
        };
        area * bump_profile(r * r)
    };
    let mut acc = shell(0.0) + shell(1.0);
    for i in 1..STEPS {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * shell(i as f64 * dr);
    }
    acc * dr / 3.0
}

/// Normalization constant `c` making the standard bump integrate to one on `ℝ^dim`.
pub fn bump_normalization(dim: usize) -> f64 {
    static CACHE: [OnceLock<f64>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    *CACHE[dim.clamp(1, 3) - 1].get_or_init(|| 1.0 / bump_integral(dim.clamp(1, 3)))
}

/// Smallest power-of-two `n` that resolves a bump of radius `epsilon` on `[−L, L)`.
pub fn required_points(half_width: f64, epsilon: f64) -> usize {
    let n = (BUMP_MIN_SPACINGS * 2.0 * half_width / epsilon).ceil() as usize;
    n.next_power_of_two().max(8)
}

/// Errors unless a bump of radius `epsilon` spans at least four grid spacings.
pub fn check_resolved(epsilon: f64, grid: &Grid) -> Result<()> {
    if epsilon < BUMP_MIN_SPACINGS * grid.spacing() * (1.0 - 1e-12) {
        return Err(Error::UnderResolved {
            epsilon,
            required_n: required_points(grid.half_width(), epsilon),
        });
    }
    Ok(())
}

/// `J^ε(x) = ε^{−d} J(x/ε)`, sampled and renormalized to unit quadrature.
pub fn make_mollifier(spec: MollifierSpec, grid: Grid) -> Result<GridFunction> {
    let eps = spec.epsilon;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {eps}")));
    }
    let d = grid.dim() as i32;
    let h = grid.spacing();
    let raw = match spec.base {
        MollifierBase::StandardBump => {
            check_resolved(eps, &grid)?;
            let c = bump_normalization(grid.dim()) / eps.powi(d);
            GridFunction::from_fn(grid, |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum::<f64>() / (eps * eps);
                c * bump_profile(r2)
            })?
        }
        MollifierBase::Gaussian => {
            let std = (2.0 * eps).sqrt();
            if std < 2.0 * h {
                log::warn!("gaussian mollifier eps={eps} has standard deviation {std:.3e} below two grid spacings ({h:.3e})");
            }
            let c = (4.0 * PI * eps).powf(-(d as f64) / 2.0);
            GridFunction::from_fn(grid, |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                c * (-r2 / (4.0 * eps)).exp()
            })?
        }
    };
    let mass = raw.quadrature();
    raw.scale(1.0 / mass)
}

/// Fitted power law of a mollifier's `H^m` norm over a range of `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub epsilons: Vec<f64>,
    pub norms: Vec<f64>,
    pub fit: LineFit,
}

impl ScalingFit {
    pub fn slope(&self) -> f64 {
        self.fit.slope
    }
}

/// Least-squares slope of `log‖J^ε‖_{H^m}` against `log ε`.
pub fn certify_mollifier_scaling(
    base: MollifierBase,
    epsilons: &[f64],
    grid: Grid,
    m: u32,
) -> Result<ScalingFit> {
    if m > 2 {
        return Err(invalid(format!("derivative order must be 0, 1 or 2, got {m}")));
    }
    let norms = epsilons
        .iter()
        .map(|&eps| {
            make_mollifier(MollifierSpec { base, epsilon: eps }, grid)?.sobolev_norm(m as f64, Norm::L2)
        })
        .collect::<Result<Vec<_>>>()?;
    power_law(epsilons, norms)
}

pub(crate) fn power_law(epsilons: &[f64], norms: Vec<f64>) -> Result<ScalingFit> {
    if epsilons.len() < 4 {
        return Err(Error::TooFewSamples {
            what: "epsilon values",
            required: 4,
            got: epsilons.len(),
        });
    }
    if norms.iter().any(|&v| !(v > 0.0)) {
        return Err(invalid("norms must be positive for a log-log fit"));
    }
    let lx: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    Ok(ScalingFit {
        epsilons: epsilons.to_vec(),
        fit: fit_line(&lx, &ly),
        norms,
    })
}

/// Radial profile of the cut-off: 1 on `[0,1]`, 0 beyond 2, quintic smoothstep between.
pub fn cutoff_profile(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let t = r - 1.0;
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

/// `ζ^ε(x) = ζ(εx)` sampled on the grid.
pub fn make_cutoff(epsilon: f64, grid: Grid) -> Result<GridFunction> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    GridFunction::from_fn(grid, |x| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        cutoff_profile(epsilon * r)
    })
}

/// `ε(N) = N^{−β}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    beta: f64,
}

impl EpsilonSchedule {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 0.5) {
            return Err(invalid(format!("beta must lie in (0, 1/2), got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn epsilon(&self, n: usize) -> f64 {
        (n.max(1) as f64).powf(-self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// `k^ε = sign · W^ε * V^ε`
    Product,
    /// `k^ε = sign · ∇(W^ε * V^ε)`
    GradientProduct,
}

/// A factorized interaction kernel with its assembled force.
///
/// `sign` carries the orientation that the factors cannot express on their own: a real
/// symmetric factorization `V * V` is a positive-definite potential, so attractive potentials
/// are written as `−V * V`.
#[derive(Debug, Clone)]
pub struct KernelPair {
    w: GridFunction,
    v: GridFunction,
    symmetric: bool,
    force: Vec<GridFunction>,
    mode: PairMode,
    sign: f64,
    epsilon: f64,
    a_w: f64,
    a_v: f64,
    strongly_admissible: bool,
    c_w: f64,
    c_v: f64,
    label: String,
}

/// Declared data for [`KernelPair::new`].
#[derive(Debug, Clone)]
pub struct PairSpec {
    pub mode: PairMode,
    pub sign: f64,
    pub epsilon: f64,
    pub a_w: f64,
    pub a_v: f64,
    pub strongly_admissible: bool,
    pub label: String,
}

impl KernelPair {
    /// Assembles the force and records the certified constants
    /// `C_W = ‖W^ε‖ ε^{a_W}` (`L²`, or `H²` when strongly admissible) and `C_V = ‖V^ε‖_{H²} ε^{a_V}`.
    /// Pass `v = None` for a symmetric factorization `W^ε = V^ε`.
    pub fn new(w: GridFunction, v: Option<GridFunction>, spec: PairSpec) -> Result<Self> {
        if spec.sign != 1.0 && spec.sign != -1.0 {
            return Err(invalid(format!("sign must be ±1, got {}", spec.sign)));
        }
        if spec.a_w < 0.0 || spec.a_v < 0.0 {
            return Err(invalid("exponents must be nonnegative"));
        }
        let symmetric = v.is_none();
        let v = v.unwrap_or_else(|| w.clone());
        w.grid().ensure_same(v.grid())?;
        let force = assemble_force(&w, &v, spec.mode, spec.sign)?;
        let w_norm = if spec.strongly_admissible {
            w.sobolev_norm(2.0, Norm::L2)?
        } else {
            w.l2_norm()
        };
        let v_norm = v.sobolev_norm(2.0, Norm::L2)?;
        Ok(Self {
            c_w: w_norm * spec.epsilon.powf(spec.a_w),
            c_v: v_norm * spec.epsilon.powf(spec.a_v),
            w,
            v,
            symmetric,
            force,
            mode: spec.mode,
            sign: spec.sign,
            epsilon: spec.epsilon,
            a_w: spec.a_w,
            a_v: spec.a_v,
            strongly_admissible: spec.strongly_admissible,
            label: spec.label,
        })
    }

    pub fn w(&self) -> &GridFunction {
        &self.w
    }

    pub fn v(&self) -> &GridFunction {
        &self.v
    }

    /// True when the pair was built as `W^ε = V^ε`.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn grid(&self) -> &Grid {
        self.w.grid()
    }

    /// First force component; the whole force in 1D.
    pub fn force(&self) -> &GridFunction {
        &self.force[0]
    }

    pub fn force_components(&self) -> &[GridFunction] {
        &self.force
    }

    pub fn mode(&self) -> PairMode {
        self.mode
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn a_w(&self) -> f64 {
        self.a_w
    }

    pub fn a_v(&self) -> f64 {
        self.a_v
    }

    pub fn strongly_admissible(&self) -> bool {
        self.strongly_admissible
    }

    pub fn c_w(&self) -> f64 {
        self.c_w
    }

    pub fn c_v(&self) -> f64 {
        self.c_v
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `sign · W^ε * V^ε`, the potential in gradient mode or the force itself in product mode.
    pub fn product(&self) -> Result<GridFunction> {
        self.w.convolve(&self.v)?.scale(self.sign)
    }

    /// `‖W^ε‖` in the norm used for certification.
    pub fn w_norm(&self) -> Result<f64> {
        if self.strongly_admissible {
            self.w.sobolev_norm(2.0, Norm::L2)
        } else {
            Ok(self.w.l2_norm())
        }
    }

    pub fn w_norm_l2(&self) -> f64 {
        self.w.l2_norm()
    }

    pub fn v_norm_h2(&self) -> Result<f64> {
        self.v.sobolev_norm(2.0, Norm::L2)
    }

    /// Replaces the force by an externally supplied one (e.g. an unmollified reference).
    pub fn with_force(mut self, force: Vec<GridFunction>) -> Result<Self> {
        if force.len() != self.grid().dim() {
            return Err(invalid("force needs one component per dimension"));
        }
        for f in &force {
            self.grid().ensure_same(f.grid())?;
        }
        self.force = force;
        Ok(self)
    }
}

/// `sign · W * V` (product mode) or `sign · ∇(W * V)` (gradient mode, one field per axis).
pub fn assemble_force(
    w: &GridFunction,
    v: &GridFunction,
    mode: PairMode,
    sign: f64,
) -> Result<Vec<GridFunction>> {
    let prod = Spectrum::of(w).product(&Spectrum::of(v))?;
    match mode {
        PairMode::Product => {
            if w.grid().dim() != 1 {
                return Err(invalid("product mode needs a scalar (1D) force"));
            }
            Ok(vec![prod.to_real()?.scale(sign)?])
        }
        PairMode::GradientProduct => (0..w.grid().dim())
            .map(|a| {
                let mut s = prod.clone();
                s.apply(&FourierMultiplier::derivative(a))?;
                s.to_real()?.scale(sign)
            })
            .collect(),
    }
}

/// Fitted exponents of a family of pairs over an ε-sweep.
#[derive(Debug, Clone)]
pub struct PairCertificate {
    pub w_fit: ScalingFit,
    pub v_fit: ScalingFit,
    pub declared_a_w: f64,
    pub declared_a_v: f64,
}

impl PairCertificate {
    pub fn fitted_a_w(&self) -> f64 {
        -self.w_fit.slope()
    }

    pub fn fitted_a_v(&self) -> f64 {
        -self.v_fit.slope()
    }

    /// Both fitted exponents within `tol` of the declared ones.
    pub fn matches(&self, tol: f64) -> bool {
        (self.fitted_a_w() - self.declared_a_w).abs() <= tol
            && (self.fitted_a_v() - self.declared_a_v).abs() <= tol
    }
}

/// Builds the pair at each `ε` and fits the norm blow-up rates.
pub fn certify_pair(
    epsilons: &[f64],
    build: impl Fn(f64) -> Result<KernelPair>,
) -> Result<PairCertificate> {
    let mut wn = Vec::new();
    let mut vn = Vec::new();
    let mut declared = (0.0, 0.0);
    for &eps in epsilons {
        let p = build(eps)?;
        wn.push(p.w_norm()?);
        vn.push(p.v_norm_h2()?);
        declared = (p.a_w, p.a_v);
    }
    Ok(PairCertificate {
        w_fit: power_law(epsilons, wn)?,
        v_fit: power_law(epsilons, vn)?,
        declared_a_w: declared.0,
        declared_a_v: declared.1,
    })
}

/// Relative defect of `F[V]² = F[target]` over frequencies where `|F[target]| > floor`.
/// The target is given on the frequency side so that tiny symbol values are not swamped by
/// real-space round-off.
pub fn factorization_symbol_defect(v: &GridFunction, target: &Spectrum, floor: f64) -> Result<f64> {
    let sv = Spectrum::of(v);
    let st = target;
    sv.grid().ensure_same(st.grid())?;
    let mut worst = 0.0f64;
    for (a, b) in sv.coeffs().iter().zip(st.coeffs()) {
        if b.norm() > floor {
            let sq: Complex64 = a * a;
            worst = worst.max((sq - b).norm() / b.norm());
        }
    }
    Ok(worst)
}

/// `max |k(x) + k(−x)|` over the grid, relative to `max |k|`.
pub fn oddness_defect(k: &GridFunction) -> f64 {
    let r = k.reflect();
    let worst = k
        .values()
        .iter()
        .zip(r.values())
        .fold(0.0f64, |m, (a, b)| m.max((a + b).abs()));
    let scale = k.max_abs();
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}
