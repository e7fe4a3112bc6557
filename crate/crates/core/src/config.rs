//! Experiment configuration: a TOML file whose every key has a default, validated as a whole
//! before anything is computed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::experiment::KernelFamily;
use crate::gridfn::{Grid, GridFunction, Tolerances};
use crate::kernels::EpsilonSchedule;
use crate::sde::SdeConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Not part of the configuration hash.
    pub output_dir: PathBuf,
    pub kernel: KernelFamily,
    pub schedule: ScheduleConfig,
    pub sde: SdeSection,
    pub grid: GridSection,
    pub initial: InitialDensity,
    pub diagnostics: DiagnosticsSection,
    pub kernel_check: KernelCheckSection,
    pub liouville: LiouvilleSection,
    pub pde_compare: PdeCompareSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub beta: f64,
    pub n_list: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeSection {
    pub sigma: f64,
    pub t_final: f64,
    pub dt: f64,
    /// Diagnostics are taken at `save_intervals + 1` equispaced times, snapped to steps.
    pub save_intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub half_width: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDensity {
    Gaussian { mean: f64, variance: f64 },
    /// A GridFunction CSV on the configured grid.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub alpha: f64,
    pub delta: f64,
    pub gamma: f64,
    pub replicas: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelCheckSection {
    pub epsilons: Vec<f64>,
    pub half_width: f64,
    pub n: usize,
}

/// The two-particle oracle runs with `N = 2` on its own one-particle grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiouvilleSection {
    pub half_width: f64,
    pub n: usize,
    pub t_final: f64,
    pub replicas: u64,
    pub save_intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeCompareSection {
    pub epsilons: Vec<f64>,
    pub half_width: f64,
    pub n: usize,
    pub t_final: f64,
    pub outputs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: PathBuf::from("out"),
            kernel: KernelFamily::default(),
            schedule: ScheduleConfig::default(),
            sde: SdeSection::default(),
            grid: GridSection::default(),
            initial: InitialDensity::default(),
            diagnostics: DiagnosticsSection::default(),
            kernel_check: KernelCheckSection::default(),
            liouville: LiouvilleSection::default(),
            pde_compare: PdeCompareSection::default(),
        }
    }
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            beta: 0.05,
            n_list: vec![128, 256, 512, 1024, 2048, 4096],
        }
    }
}

impl Default for SdeSection {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            t_final: 0.5,
            dt: 0.01,
            save_intervals: 25,
        }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            half_width: 8.0,
            n: 1024,
        }
    }
}

impl Default for InitialDensity {
    fn default() -> Self {
        InitialDensity::Gaussian {
            mean: 0.0,
            variance: 0.25,
        }
    }
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            delta: 0.05,
            gamma: 2.0,
            replicas: 200,
        }
    }
}

impl Default for KernelCheckSection {
    fn default() -> Self {
        Self {
            epsilons: vec![0.4, 0.2, 0.1, 0.05],
            half_width: 8.0,
            n: 2048,
        }
    }
}

impl Default for LiouvilleSection {
    fn default() -> Self {
        Self {
            half_width: 4.0,
            n: 128,
            t_final: 0.25,
            replicas: 400,
            save_intervals: 25,
        }
    }
}

impl Default for PdeCompareSection {
    fn default() -> Self {
        Self {
            epsilons: vec![0.2, 0.1, 0.05, 0.025],
            half_width: 4.0,
            n: 2048,
            t_final: 0.5,
            outputs: 50,
        }
    }
}

fn positive(v: f64, what: &str) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{what} must be positive and finite, got {v}")))
    }
}

fn equispaced(t_final: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals).map(|i| t_final * i as f64 / intervals as f64).collect()
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// The TOML form without `output_dir`: everything that determines the results.
    pub fn canonical_toml(&self) -> String {
        let mut table = toml::Table::try_from(self).expect("configuration serializes");
        table.remove("output_dir");
        table.to_string()
    }

    /// First 16 hex digits of the SHA-256 of [`canonical_toml`](Self::canonical_toml).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn schedule(&self) -> Result<EpsilonSchedule> {
        EpsilonSchedule::new(self.schedule.beta)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(1, self.grid.half_width, self.grid.n)
    }

    /// Initial density on `grid`, normalized to unit mass.
    pub fn initial_density(&self, grid: Grid) -> Result<GridFunction> {
        let mut rho = match &self.initial {
            InitialDensity::Gaussian { mean, variance } => {
                positive(*variance, "initial variance")?;
                GridFunction::from_fn(grid, |x| (-(x[0] - mean).powi(2) / (2.0 * variance)).exp())?
            }
            InitialDensity::File { path } => {
                let f = GridFunction::load_csv(path)?;
                f.grid().ensure_same(&grid)?;
                if f.min() < 0.0 {
                    return Err(Error::NotADensity(format!("initial density has minimum {}", f.min())));
                }
                f
            }
        };
        rho.normalize_density()?;
        rho.check_density(&Tolerances::default())?;
        Ok(rho)
    }

    pub fn sde_config(&self, n_particles: usize) -> Result<SdeConfig> {
        SdeConfig::new(n_particles, self.sde.sigma, self.sde.t_final, self.sde.dt, self.seed, 0)?
            .with_save_times(equispaced(self.sde.t_final, self.sde.save_intervals))
    }

    pub fn liouville_grid(&self) -> Result<Grid> {
        Grid::new(1, self.liouville.half_width, self.liouville.n)
    }

    /// The oracle's particle configuration: `N = 2`, the SDE step and noise, its own horizon.
    pub fn liouville_sde_config(&self) -> Result<SdeConfig> {
        SdeConfig::new(2, self.sde.sigma, self.liouville.t_final, self.sde.dt, self.seed, 0)?
            .with_save_times(equispaced(self.liouville.t_final, self.liouville.save_intervals))
    }

    pub fn pde_compare_grid(&self) -> Result<Grid> {
        Grid::new(1, self.pde_compare.half_width, self.pde_compare.n)
    }

    pub fn kernel_check_grid(&self) -> Result<Grid> {
        Grid::new(self.kernel.dim(), self.kernel_check.half_width, self.kernel_check.n)
    }

    /// Checks shared by every subcommand.
    pub fn validate_common(&self) -> Result<()> {
        self.schedule()?;
        let d = &self.diagnostics;
        positive(d.alpha, "alpha")?;
        positive(d.delta, "delta")?;
        positive(d.gamma, "gamma")?;
        if d.alpha + d.delta >= 0.5 {
            return Err(invalid(format!("alpha + delta must be below 1/2, got {}", d.alpha + d.delta)));
        }
        if d.replicas == 0 {
            return Err(invalid("need at least one replica"));
        }
        positive(self.sde.sigma, "sigma")?;
        positive(self.sde.t_final, "t_final")?;
        positive(self.sde.dt, "dt")?;
        if self.sde.save_intervals == 0 {
            return Err(invalid("save_intervals must be at least 1"));
        }
        if let KernelFamily::Custom { file } = &self.kernel {
            if !Path::new(file).is_file() {
                return Err(invalid(format!("custom kernel file {file} not found")));
            }
        }
        Ok(())
    }

    fn require_1d_kernel(&self, what: &str) -> Result<()> {
        if self.kernel.dim() != 1 {
            return Err(invalid(format!("{what} runs 1D kernels only")));
        }
        Ok(())
    }

    /// Everything `simulate` and `rate-sweep` need, including resolvability of `ε(max N)`.
    pub fn validate_sweep(&self) -> Result<()> {
        self.validate_common()?;
        self.require_1d_kernel("the particle sweep")?;
        let list = &self.schedule.n_list;
        if list.is_empty() || list.iter().any(|&n| n < 2) {
            return Err(invalid("n_list needs entries of at least 2 particles"));
        }
        let mut sorted = list.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != list.len() {
            return Err(invalid("n_list entries must be distinct"));
        }
        let grid = self.grid()?;
        self.kernel.check_resolved(self.schedule()?.epsilon(sorted[sorted.len() - 1]), &grid)?;
        self.initial_density(grid)?;
        self.sde_config(sorted[0])?.validate()?;
        Ok(())
    }

    pub fn validate_kernel_check(&self) -> Result<()> {
        self.validate_common()?;
        let eps = &self.kernel_check.epsilons;
        if eps.len() < 4 {
            return Err(invalid("kernel-check needs at least four epsilons"));
        }
        let grid = self.kernel_check_grid()?;
        for &e in eps {
            positive(e, "epsilon")?;
            self.kernel.check_resolved(e, &grid)?;
        }
        Ok(())
    }

    /// The oracle is also solved at half resolution for its grid-error estimate.
    pub fn validate_liouville(&self) -> Result<()> {
        self.validate_common()?;
        self.require_1d_kernel("the Liouville oracle")?;
        positive(self.liouville.t_final, "liouville t_final")?;
        if self.liouville.save_intervals == 0 || self.liouville.replicas == 0 {
            return Err(invalid("liouville needs save_intervals and replicas of at least 1"));
        }
        let grid = self.liouville_grid()?;
        let eps = self.schedule()?.epsilon(2);
        self.kernel.check_resolved(eps, &grid)?;
        self.kernel.check_resolved(eps, &grid.with_n(grid.n() / 2)?)?;
        if !matches!(self.initial, InitialDensity::Gaussian { .. }) {
            return Err(invalid("the Liouville oracle takes a Gaussian initial density"));
        }
        self.initial_density(grid)?;
        self.liouville_sde_config()?.validate()?;
        Ok(())
    }

    pub fn validate_pde_compare(&self) -> Result<()> {
        self.validate_common()?;
        self.require_1d_kernel("pde-compare")?;
        let grid = self.pde_compare_grid()?;
        self.kernel.limit_force(grid)?;
        positive(self.pde_compare.t_final, "pde_compare t_final")?;
        if self.pde_compare.outputs == 0 || self.pde_compare.epsilons.is_empty() {
            return Err(invalid("pde-compare needs epsilons and at least one output time"));
        }
        for &e in &self.pde_compare.epsilons {
            positive(e, "epsilon")?;
            self.kernel.check_resolved(e, &grid)?;
        }
        if !matches!(self.initial, InitialDensity::Gaussian { .. }) {
            return Err(invalid("pde-compare takes a Gaussian initial density"));
        }
        Ok(())
    }
}
