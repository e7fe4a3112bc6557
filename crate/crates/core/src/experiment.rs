//! Drivers that combine the solvers: coupled particle/mean-field replicas, the two-particle
//! Liouville oracle, ε-sweeps against the unregularized equation, and kernel certification.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    entropy_bound_rhs, lln_defect, modulated_energy, mollified_l2, DiagnosticsRecord, Estimate, SaveRow,
};
use crate::error::{invalid, Result};
use crate::gridfn::{FourierMultiplier, Grid, GridFunction, Spectrum, Tolerances};
use crate::kernels::{
    bessel_pair, bounded_confidence_force, bounded_confidence_pair, certify_pair, check_resolved, coulomb_factorization_residual,
    coulomb_factorized_pair, factorization_symbol_defect, make_mollifier, oddness_defect, MollifierBase, BesselRoute, BoundedConfidenceRoute, CoulombRoute, KernelPair,
    MollifierSpec, PairMode, PairSpec,
};
use crate::meanfield_pde::{
    deregularization_residual, l1_distance, marginal, relative_entropy, tensor_product, LiouvilleState2,
    LiouvilleVelocity, PdeState,
};
use crate::sde::{sample_initial, KernelTable, ParticleEnsemble, SdeConfig};

/// Interaction kernels selectable from a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    BoundedConfidence {
        #[serde(default = "default_radius")]
        r: f64,
        #[serde(default = "default_bc_route")]
        route: BoundedConfidenceRoute,
    },
    Coulomb {
        #[serde(default = "default_coulomb_dim")]
        d: usize,
        #[serde(default = "default_coulomb_route")]
        route: CoulombRoute,
    },
    Bessel {
        #[serde(default = "default_bessel_dim")]
        d: usize,
        #[serde(default = "default_bessel_route")]
        route: BesselRoute,
    },
    /// A 1D force read from a GridFunction CSV file, mollified as `W = k`, `V = J^ε`.
    Custom { file: String },
}

fn default_radius() -> f64 {
    1.0
}
fn default_bc_route() -> BoundedConfidenceRoute {
    BoundedConfidenceRoute::Force
}
fn default_coulomb_dim() -> usize {
    3
}
fn default_coulomb_route() -> CoulombRoute {
    CoulombRoute::WeierstrassSqrt
}
fn default_bessel_dim() -> usize {
    1
}
fn default_bessel_route() -> BesselRoute {
    BesselRoute::Weierstrass
}

impl Default for KernelFamily {
    fn default() -> Self {
        KernelFamily::BoundedConfidence {
            r: default_radius(),
            route: default_bc_route(),
        }
    }
}

impl KernelFamily {
    /// Dimension the family is built in.
    pub fn dim(&self) -> usize {
        match self {
            KernelFamily::Coulomb { d, .. } | KernelFamily::Bessel { d, .. } => *d,
            _ => 1,
        }
    }

    /// Radius of the compactly supported bump the family samples at `epsilon`, if any.
    pub fn bump_radius(&self, epsilon: f64) -> Option<f64> {
        match self {
            KernelFamily::BoundedConfidence { .. } | KernelFamily::Custom { .. } => Some(epsilon),
            KernelFamily::Bessel { route, .. } => (*route == BesselRoute::Mollifier).then_some(epsilon),
            KernelFamily::Coulomb { route, .. } => match route {
                CoulombRoute::MollifyBoth => Some(epsilon / 2.0),
                CoulombRoute::FourierSqrt(MollifierBase::StandardBump) => Some(epsilon),
                _ => None,
            },
        }
    }

    /// Errors if the family's bump at `epsilon` is under-resolved on `grid`.
    pub fn check_resolved(&self, epsilon: f64, grid: &Grid) -> Result<()> {
        match self.bump_radius(epsilon) {
            Some(r) => check_resolved(r, grid),
            None => Ok(()),
        }
    }

    /// Builds the pair at `epsilon` on `grid` (whose dimension must match [`dim`](Self::dim)).
    pub fn build(&self, epsilon: f64, grid: Grid) -> Result<KernelPair> {
        if grid.dim() != self.dim() {
            return Err(invalid(format!(
                "kernel family needs a {}D grid, got {}D",
                self.dim(),
                grid.dim()
            )));
        }
        match self {
            KernelFamily::BoundedConfidence { r, route } => bounded_confidence_pair(*r, epsilon, grid, *route),
            KernelFamily::Coulomb { route, .. } => coulomb_factorized_pair(epsilon, grid, *route),
            KernelFamily::Bessel { route, .. } => bessel_pair(epsilon, grid, *route),
            KernelFamily::Custom { file } => {
                let k = GridFunction::load_csv(file)?;
                if k.grid() != &grid {
                    return Err(invalid(format!("custom kernel grid {:?} differs from {:?}", k.grid(), grid)));
                }
                let j = make_mollifier(MollifierSpec::bump(epsilon), grid)?;
                KernelPair::new(
                    k,
                    Some(j),
                    PairSpec {
                        mode: PairMode::Product,
                        sign: 1.0,
                        epsilon,
                        a_w: 0.0,
                        a_v: 2.5,
                        strongly_admissible: false,
                        label: "custom".into(),
                    },
                )
            }
        }
    }

    /// The unregularized 1D force, where one exists on the grid.
    pub fn limit_force(&self, grid: Grid) -> Result<GridFunction> {
        match self {
            KernelFamily::BoundedConfidence { r, .. } => bounded_confidence_force(*r, grid),
            KernelFamily::Custom { file } => GridFunction::load_csv(file),
            _ => Err(invalid("only bounded kernels have an unregularized reference force")),
        }
    }
}

/// The mean-field solution along the particle time grid: the drift field `k^ε * ρ^ε` at every
/// step time and `ρ^ε` at every save step.
#[derive(Debug, Clone)]
pub struct MeanFieldPath {
    fields: Vec<GridFunction>,
    saves: Vec<(usize, GridFunction)>,
    renormalization: f64,
}

impl MeanFieldPath {
    /// Solves the PDE from `rho0` with internal CFL-limited substeps between particle steps.
    pub fn solve(rho0: &GridFunction, force: &GridFunction, cfg: &SdeConfig, tol: &Tolerances) -> Result<Self> {
        let mut state = PdeState::new(rho0.clone(), cfg.sigma, force.clone(), tol)?;
        let save_steps = cfg.save_steps();
        let steps = cfg.steps();
        let mut fields = Vec::with_capacity(steps + 1);
        let mut saves = Vec::with_capacity(save_steps.len());
        for k in 0..=steps {
            if save_steps.binary_search(&k).is_ok() {
                saves.push((k, state.rho().clone()));
            }
            fields.push(state.field()?);
            if k < steps {
                state.advance_to((k + 1) as f64 * cfg.dt, cfg.dt)?;
            }
        }
        Ok(Self {
            fields,
            saves,
            renormalization: state.renormalization(),
        })
    }

    /// `k^ε * ρ^ε` at step `k`.
    pub fn field(&self, k: usize) -> &GridFunction {
        &self.fields[k]
    }

    /// `(step, ρ^ε)` at the save steps.
    pub fn saves(&self) -> &[(usize, GridFunction)] {
        &self.saves
    }

    pub fn rho_at(&self, step: usize) -> Option<&GridFunction> {
        self.saves.iter().find(|s| s.0 == step).map(|s| &s.1)
    }

    pub fn renormalization(&self) -> f64 {
        self.renormalization
    }
}

/// Everything shared by the replicas at one `N`.
#[derive(Debug, Clone)]
pub struct CoupledSetup {
    pair: KernelPair,
    table: KernelTable,
    v_dx: GridFunction,
    rho0: GridFunction,
    path: MeanFieldPath,
    cfg: SdeConfig,
    tol: Tolerances,
}

impl CoupledSetup {
    pub fn new(pair: KernelPair, rho0: GridFunction, cfg: SdeConfig, tol: Tolerances) -> Result<Self> {
        if !(cfg.sigma > 0.0) {
            return Err(invalid("coupled runs need sigma > 0"));
        }
        pair.grid().ensure_same(rho0.grid())?;
        let table = KernelTable::from_pair(&pair)?;
        let v_dx = pair.v().derivative(0)?;
        let path = MeanFieldPath::solve(&rho0, pair.force(), &cfg, &tol)?;
        if path.renormalization() > 1e-8 {
            log::warn!("mean-field solve renormalized mass by {:e} in total", path.renormalization());
        }
        Ok(Self {
            pair,
            table,
            v_dx,
            rho0,
            path,
            cfg,
            tol,
        })
    }

    pub fn pair(&self) -> &KernelPair {
        &self.pair
    }

    pub fn path(&self) -> &MeanFieldPath {
        &self.path
    }

    pub fn config(&self) -> &SdeConfig {
        &self.cfg
    }

    pub fn save_times(&self) -> Vec<f64> {
        self.path.saves.iter().map(|s| s.0 as f64 * self.cfg.dt).collect()
    }

    /// Runs one replica, evaluating every diagnostic at the save steps.
    pub fn run_replica(&self, replica: u64) -> Result<DiagnosticsRecord> {
        let cfg = self.cfg.clone().with_replica(replica);
        let grid = *self.rho0.grid();
        let init = sample_initial(&self.rho0, cfg.n_particles, cfg.seed, replica, &self.tol)?;
        let mut ens = ParticleEnsemble::new(init, &cfg, grid, self.pair.epsilon())?;
        let steps = cfg.steps();
        let mut rows = Vec::with_capacity(self.path.saves.len());
        let mut next_save = self.path.saves.iter().peekable();
        for k in 0..=steps {
            if let Some((_, rho)) = next_save.next_if(|s| s.0 == k) {
                let mu = ens.empirical_x();
                rows.push(SaveRow {
                    t: k as f64 * cfg.dt,
                    l2_moll: mollified_l2(&mu, rho, self.pair.v())?,
                    l2_moll_dx: mollified_l2(&mu, rho, &self.v_dx)?,
                    modulated_energy: modulated_energy(&mu, rho, &self.pair, cfg.sigma)?,
                    coupling_max: ens.update_coupling(),
                    lln_defect: lln_defect(ens.y(), &self.table, self.path.field(k)),
                });
            }
            if k < steps {
                ens.step_interacting(&self.table);
                ens.step_meanfield(self.path.field(k), k as f64 * cfg.dt)?;
            }
        }
        Ok(DiagnosticsRecord {
            replica,
            n_particles: cfg.n_particles,
            rows,
            x1_final: ens.x()[0],
            boundary_hits: ens.boundary_hits(),
        })
    }

    /// Replicas `0..m`, in parallel; the output is in replica order.
    pub fn run_replicas(&self, m: u64) -> Result<Vec<DiagnosticsRecord>> {
        (0..m).into_par_iter().map(|r| self.run_replica(r)).collect()
    }
}

/// `H(ρ₂ | ρ ⊗ ρ)` and the CKP pairs of one Liouville save time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiouvilleSlice {
    pub t: f64,
    /// Normalized two-particle entropy `(1/2) H(ρ₂ | ρ^ε ⊗ ρ^ε)`.
    pub h2: f64,
    /// `‖ρ₂ − ρ ⊗ ρ‖²_{L¹}` and `2 H(ρ₂ | ρ ⊗ ρ)`.
    pub ckp_joint: (f64, f64),
    /// `‖ρ^{2,1} − ρ‖²_{L¹}` and `2 H(ρ^{2,1} | ρ)`.
    pub ckp_marginal: (f64, f64),
}

/// Solves the two-particle Liouville equation and the mean-field equation side by side and
/// records the entropy between the joint law and the tensorized law at `times`.
pub fn liouville_entropy_series(
    rho0: &GridFunction,
    force: &GridFunction,
    sigma: f64,
    times: &[f64],
    max_dt: f64,
    tol: &Tolerances,
) -> Result<Vec<LiouvilleSlice>> {
    let velocity = LiouvilleVelocity::new(force)?;
    let mut joint = LiouvilleState2::from_initial(rho0, tol)?;
    let mut one = PdeState::new(rho0.clone(), sigma, force.clone(), tol)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        // both solvers take identical substeps
        while t - joint.time() > 1e-12 * t.max(1.0) {
            let dt = (t - joint.time())
                .min(max_dt)
                .min(0.9 * velocity.admissible_dt())
                .min(0.9 * one.admissible_dt()?);
            joint.step(&velocity, sigma, dt)?;
            one.step(dt)?;
        }
        let tensor = tensor_product(one.rho(), one.rho())?;
        let h_joint = relative_entropy(joint.rho2(), &tensor)?;
        let l1_joint = l1_distance(joint.rho2(), &tensor)?;
        let m = marginal(&joint)?;
        let h_marg = relative_entropy(&m, one.rho())?;
        let l1_marg = l1_distance(&m, one.rho())?;
        out.push(LiouvilleSlice {
            t,
            h2: 0.5 * h_joint,
            ckp_joint: (l1_joint * l1_joint, 2.0 * h_joint),
            ckp_marginal: (l1_marg * l1_marg, 2.0 * h_marg),
        });
    }
    Ok(out)
}

/// Oracle entropy versus the particle-side entropy bound at each save time (`N = 2`).
#[derive(Debug, Clone)]
pub struct OracleRow {
    pub slice: LiouvilleSlice,
    pub bound: Estimate,
}

/// Runs the `N = 2` oracle: the Liouville entropy series and `m` coupled replicas whose
/// mollified L² series give the entropy bound up to each save time.
pub fn liouville_oracle(
    pair: &KernelPair,
    rho0: &GridFunction,
    cfg: &SdeConfig,
    m: u64,
    tol: &Tolerances,
) -> Result<Vec<OracleRow>> {
    if cfg.n_particles != 2 {
        return Err(invalid("the Liouville oracle runs with N = 2"));
    }
    let setup = CoupledSetup::new(pair.clone(), rho0.clone(), cfg.clone(), *tol)?;
    let records = setup.run_replicas(m)?;
    let times = setup.save_times();
    let slices = liouville_entropy_series(rho0, pair.force(), cfg.sigma, &times, cfg.dt, tol)?;
    let w_norm = pair.w_norm_l2();
    let series: Vec<Vec<f64>> = records.iter().map(|r| r.entropy_series(pair.mode())).collect();
    slices
        .into_iter()
        .enumerate()
        .map(|(i, slice)| {
            let upto: Vec<Vec<f64>> = series.iter().map(|s| s[..=i].to_vec()).collect();
            let bound = entropy_bound_rhs(&times[..=i], &upto, w_norm, cfg.sigma)?;
            Ok(OracleRow { slice, bound })
        })
        .collect()
}

/// One ε of a de-regularization sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeCompareRow {
    pub epsilon: f64,
    /// `‖ρ^ε_T − ρ_T‖_{L¹}`.
    pub l1_final: f64,
    /// `∫₀ᵀ ‖ρ^ε_t − ρ_t‖_{L¹} dt` (trapezoid over the output times).
    pub l1_integrated: f64,
    /// `∫∫ |k − k^ε|²(x − y) ρ_T(x) ρ_T(y)`.
    pub residual: f64,
    /// CKP pair `(‖ρ^ε_T − ρ_T‖²_{L¹}, 2 H(ρ^ε_T | ρ_T))`.
    pub ckp: (f64, f64),
}

/// Solves the regularized equation for each `ε` and the unregularized one (force `k`) on the
/// same grid, comparing them at `outputs` equispaced times.
#[allow(clippy::too_many_arguments)]
pub fn pde_compare(
    family: &KernelFamily,
    epsilons: &[f64],
    rho0: &GridFunction,
    sigma: f64,
    t_final: f64,
    max_dt: f64,
    outputs: usize,
    tol: &Tolerances,
) -> Result<Vec<PdeCompareRow>> {
    if outputs == 0 {
        return Err(invalid("need at least one output time"));
    }
    let grid = *rho0.grid();
    let k = family.limit_force(grid)?;
    let times: Vec<f64> = (0..=outputs).map(|i| t_final * i as f64 / outputs as f64).collect();
    let reference = trajectory(PdeState::new(rho0.clone(), sigma, k.clone(), tol)?, &times, max_dt)?;
    epsilons
        .par_iter()
        .map(|&eps| {
            let pair = family.build(eps, grid)?;
            let path = trajectory(PdeState::from_pair(rho0.clone(), sigma, &pair, tol)?, &times, max_dt)?;
            let l1: Vec<f64> = path
                .iter()
                .zip(&reference)
                .map(|(a, b)| l1_distance(a, b))
                .collect::<Result<_>>()?;
            let (last, last_ref) = (path.last().unwrap(), reference.last().unwrap());
            let l1_final = *l1.last().unwrap();
            Ok(PdeCompareRow {
                epsilon: eps,
                l1_final,
                l1_integrated: crate::diagnostics::trapezoid(&times, &l1),
                residual: deregularization_residual(&k, pair.force(), last_ref)?,
                ckp: (l1_final * l1_final, 2.0 * relative_entropy(last, last_ref)?),
            })
        })
        .collect()
}

fn trajectory(mut state: PdeState, times: &[f64], max_dt: f64) -> Result<Vec<GridFunction>> {
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        state.advance_to(t, max_dt)?;
        out.push(state.rho().clone());
    }
    Ok(out)
}

/// How far the assembled product is from the kernel it should reproduce, for the routes that
/// have an independent oracle: the heat-kernel Coulomb routes against a directly convolved
/// `Φ * h^ε`, and the Bessel heat-kernel route against its symbol.
pub fn factorization_residual(family: &KernelFamily, pair: &KernelPair) -> Result<Option<f64>> {
    match family {
        KernelFamily::Coulomb {
            route: CoulombRoute::WeierstrassSqrt | CoulombRoute::FourierSqrt(MollifierBase::Gaussian),
            ..
        } => Ok(Some(coulomb_factorization_residual(pair)?)),
        KernelFamily::Bessel {
            route: BesselRoute::Weierstrass,
            ..
        } => {
            let eps = pair.epsilon();
            let target = Spectrum::from_symbol(
                *pair.grid(),
                &FourierMultiplier::real(move |xi| {
                    let r2: f64 = xi.iter().map(|v| v * v).sum();
                    (-4.0 * eps * PI * PI * r2).exp() / (1.0 + 4.0 * PI * PI * r2)
                }),
            )?;
            Ok(Some(factorization_symbol_defect(pair.v(), &target, 1e-12)?))
        }
        _ => Ok(None),
    }
}

/// One row of a kernel certification table.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificationRow {
    pub epsilon: f64,
    pub w_norm: f64,
    pub v_norm_h2: f64,
    pub c_w: f64,
    pub c_v: f64,
    pub oddness: f64,
    pub factorization_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificationTable {
    pub label: String,
    pub rows: Vec<CertificationRow>,
    pub declared_a_w: f64,
    pub declared_a_v: f64,
    pub fitted_a_w: f64,
    pub fitted_a_v: f64,
}

/// Builds the family over `epsilons` and fits the norm blow-up exponents.
pub fn certify_family(family: &KernelFamily, epsilons: &[f64], grid: Grid) -> Result<CertificationTable> {
    let rows = epsilons
        .iter()
        .map(|&eps| {
            let p = family.build(eps, grid)?;
            Ok(CertificationRow {
                epsilon: eps,
                w_norm: p.w_norm()?,
                v_norm_h2: p.v_norm_h2()?,
                c_w: p.c_w(),
                c_v: p.c_v(),
                oddness: p.force_components().iter().map(oddness_defect).fold(0.0, f64::max),
                factorization_residual: factorization_residual(family, &p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cert = certify_pair(epsilons, |eps| family.build(eps, grid))?;
    Ok(CertificationTable {
        label: family.build(epsilons[0], grid)?.label().to_string(),
        rows,
        declared_a_w: cert.declared_a_w,
        declared_a_v: cert.declared_a_v,
        fitted_a_w: cert.fitted_a_w(),
        fitted_a_v: cert.fitted_a_v(),
    })
}

pub const CERTIFICATION_HEADER: &str = "epsilon,w_norm,v_norm_h2,c_w,c_v,oddness,factorization_residual";
pub const CERTIFICATION_FIT_HEADER: &str = "label,declared_a_w,fitted_a_w,declared_a_v,fitted_a_v";
pub const ORACLE_HEADER: &str =
    "t,h2,entropy_bound,bound_stderr,grid_error,l1_joint_sq,two_h_joint,l1_marginal_sq,two_h_marginal";
pub const PDE_COMPARE_HEADER: &str = "epsilon,l1_final,l1_integrated,residual,l1_final_sq,two_h_final";

/// Rows of the certification table; an empty residual field means the route has no oracle.
pub fn write_certification<W: Write>(mut w: W, table: &CertificationTable) -> Result<()> {
    writeln!(w, "{CERTIFICATION_HEADER}")?;
    for r in &table.rows {
        let res = r.factorization_residual.map(|v| format!("{v:e}")).unwrap_or_default();
        writeln!(
            w,
            "{:e},{:e},{:e},{:e},{:e},{:e},{res}",
            r.epsilon, r.w_norm, r.v_norm_h2, r.c_w, r.c_v, r.oddness
        )?;
    }
    Ok(())
}

pub fn write_certification_fit<W: Write>(mut w: W, table: &CertificationTable) -> Result<()> {
    writeln!(w, "{CERTIFICATION_FIT_HEADER}")?;
    writeln!(
        w,
        "{},{:e},{:e},{:e},{:e}",
        table.label, table.declared_a_w, table.fitted_a_w, table.declared_a_v, table.fitted_a_v
    )?;
    Ok(())
}

/// `grid_error[i]` is the entropy discrepancy against a coarser solve at the same time.
pub fn write_oracle<W: Write>(mut w: W, rows: &[OracleRow], grid_error: &[f64]) -> Result<()> {
    if grid_error.len() != rows.len() {
        return Err(invalid("one grid error per oracle row"));
    }
    writeln!(w, "{ORACLE_HEADER}")?;
    for (r, g) in rows.iter().zip(grid_error) {
        let s = &r.slice;
        writeln!(
            w,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            s.t, s.h2, r.bound.mean, r.bound.stderr, g, s.ckp_joint.0, s.ckp_joint.1, s.ckp_marginal.0, s.ckp_marginal.1
        )?;
    }
    Ok(())
}

pub fn write_pde_compare<W: Write>(mut w: W, rows: &[PdeCompareRow]) -> Result<()> {
    writeln!(w, "{PDE_COMPARE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{:e},{:e},{:e},{:e},{:e},{:e}",
            r.epsilon, r.l1_final, r.l1_integrated, r.residual, r.ckp.0, r.ckp.1
        )?;
    }
    Ok(())
}
