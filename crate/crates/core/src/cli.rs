//! The `chaoslab` command line: configuration loading, validation, thread pool setup and
//! report emission. All outputs of a command are rendered in memory and written only after
//! the computation succeeded.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::diagnostics::{
    mann_kendall_decreasing, marginal_entropy_estimate, predicted_rate_table, write_rates, write_records,
    DiagnosticsRecord, SweepContext, SweepReport, SweepRow, COUPLING_FREQ, LLN_FREQ, MIN_KDE_SAMPLES,
    MIN_REPLICAS, RECORD_HEADER, SUP_L2,
};
use crate::error::{Error, ErrorClass, Result};
use crate::experiment::{
    certify_family, liouville_entropy_series, liouville_oracle, pde_compare, write_certification,
    write_certification_fit, write_oracle, write_pde_compare, CoupledSetup,
};
use crate::gridfn::Tolerances;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Sweep quantity: KDE estimate of `H(law(X¹_T) | ρ^ε_T)` over replicas.
pub const MARGINAL_ENTROPY_KDE: &str = "marginal_entropy_kde";

#[derive(Debug, Parser)]
#[command(name = "chaoslab", version, about = "Propagation-of-chaos experiments for moderately interacting particles")]
pub struct Cli {
    /// TOML configuration; every key has a default.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "CHAOSLAB_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Coupled particle/mean-field replicas over the N list; per-replica records and summaries.
    Simulate,
    /// Norm blow-up exponents and factorization residuals over an ε sweep.
    KernelCheck,
    /// Two-particle Liouville entropy against the particle-side entropy bound.
    LiouvilleOracle,
    /// Regularized against unregularized mean-field solutions over an ε sweep.
    PdeCompare,
    /// `simulate` plus fitted rates, predicted exponents and trend tests.
    RateSweep,
}

/// One rendered output file.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: &'static str,
    pub bytes: Vec<u8>,
}

impl ExperimentConfig {
    /// Flags take precedence over file keys.
    pub fn with_overrides(mut self, cli: &Cli) -> Self {
        if let Some(seed) = cli.seed {
            self.seed = seed;
        }
        if let Some(out) = &cli.out {
            self.output_dir = out.clone();
        }
        self
    }

    pub fn validate_for(&self, command: Command) -> Result<()> {
        match command {
            Command::Simulate | Command::RateSweep => self.validate_sweep(),
            Command::KernelCheck => self.validate_kernel_check(),
            Command::LiouvilleOracle => self.validate_liouville(),
            Command::PdeCompare => self.validate_pde_compare(),
        }
    }
}

/// Records and summaries of a full `N` sweep.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<DiagnosticsRecord>,
    pub report: SweepReport,
    pub predicted_binding: f64,
}

/// Runs every `N` of the list; summaries need at least [`MIN_REPLICAS`] replicas.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    let grid = cfg.grid()?;
    let rho0 = cfg.initial_density(grid)?;
    let schedule = cfg.schedule()?;
    let tol = Tolerances::default();
    let d = &cfg.diagnostics;
    let mut records = Vec::new();
    let mut report = SweepReport::default();
    let mut predicted_binding = f64::NAN;
    for &n in &cfg.schedule.n_list {
        let eps = schedule.epsilon(n);
        let pair = cfg.kernel.build(eps, grid)?;
        predicted_binding = predicted_rate_table(&pair, d.alpha, schedule.beta(), d.gamma).binding;
        log::info!("N={n} eps={eps:.4} replicas={}", d.replicas);
        let setup = CoupledSetup::new(pair, rho0.clone(), cfg.sde_config(n)?, tol)?;
        let recs = setup.run_replicas(d.replicas)?;
        if recs.len() >= MIN_REPLICAS {
            let ctx = SweepContext {
                alpha: d.alpha,
                delta: d.delta,
                sigma: cfg.sde.sigma,
                mode: setup.pair().mode(),
            };
            report.add(n, &recs, setup.pair().w_norm_l2(), &ctx)?;
        } else {
            log::warn!("N={n}: {} replicas are too few for summaries (need {MIN_REPLICAS})", recs.len());
        }
        if recs.len() >= MIN_KDE_SAMPLES {
            let last = setup.path().saves().last().expect("at least one save time");
            let x1: Vec<f64> = recs.iter().map(|r| r.x1_final).collect();
            let kde = marginal_entropy_estimate(&x1, &last.1, setup.pair().v(), cfg.seed ^ n as u64)?;
            report.rows.push(SweepRow {
                n,
                quantity: MARGINAL_ENTROPY_KDE,
                mean: kde.value,
                stderr: kde.stderr,
                count: x1.len(),
            });
        }
        records.extend(recs);
    }
    Ok(SweepOutput {
        records,
        report,
        predicted_binding,
    })
}

fn header(cfg: &ExperimentConfig) -> Vec<u8> {
    format!("# chaoslab {VERSION} config={}\n", cfg.hash()).into_bytes()
}

fn render(cfg: &ExperimentConfig, name: &'static str, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<OutputFile> {
    let mut bytes = header(cfg);
    body(&mut bytes)?;
    Ok(OutputFile { name, bytes })
}

fn sweep_files(cfg: &ExperimentConfig, out: &SweepOutput) -> Result<Vec<OutputFile>> {
    Ok(vec![
        render(cfg, "records.csv", |w| {
            use std::io::Write;
            writeln!(w, "{RECORD_HEADER}")?;
            write_records(w, &out.records)
        })?,
        render(cfg, "sweep.csv", |w| out.report.write_csv(w))?,
    ])
}

fn rate_files(cfg: &ExperimentConfig, out: &SweepOutput) -> Result<Vec<OutputFile>> {
    use std::io::Write;
    let rates = out.report.rates(out.predicted_binding);
    let d = &cfg.diagnostics;
    let grid = cfg.grid()?;
    let beta = cfg.schedule()?.beta();
    let pair = cfg.kernel.build(cfg.schedule()?.epsilon(cfg.schedule.n_list[0]), grid)?;
    let table = predicted_rate_table(&pair, d.alpha, beta, d.gamma);
    let mut files = vec![
        render(cfg, "rates.csv", |w| write_rates(w, &rates))?,
        render(cfg, "predicted_rates.csv", |w| {
            writeln!(w, "term,exponent,binding")?;
            for (term, e) in &table.terms {
                writeln!(w, "{term},{e:e},{}", *e == table.binding)?;
            }
            Ok(())
        })?,
    ];
    let mut trends = Vec::new();
    for q in [SUP_L2, COUPLING_FREQ, LLN_FREQ] {
        let values: Vec<f64> = out.report.series(q).into_iter().map(|p| p.1).collect();
        match mann_kendall_decreasing(&values) {
            Ok(t) => trends.push((q, t)),
            Err(e) => log::info!("no trend test for {q}: {e}"),
        }
    }
    files.push(render(cfg, "trends.csv", |w| {
        writeln!(w, "quantity,s,z,p_value,decreasing")?;
        for (q, t) in &trends {
            writeln!(w, "{q},{},{:e},{:e},{}", t.s, t.z, t.p_value, t.decreasing)?;
        }
        Ok(())
    })?);
    Ok(files)
}

fn kernel_check_files(cfg: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    let table = certify_family(&cfg.kernel, &cfg.kernel_check.epsilons, cfg.kernel_check_grid()?)?;
    Ok(vec![
        render(cfg, "kernel_check.csv", |w| write_certification(w, &table))?,
        render(cfg, "kernel_fit.csv", |w| write_certification_fit(w, &table))?,
    ])
}

fn liouville_files(cfg: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    let grid = cfg.liouville_grid()?;
    let coarse = grid.with_n(grid.n() / 2)?;
    let eps = cfg.schedule()?.epsilon(2);
    let sde = cfg.liouville_sde_config()?;
    let tol = Tolerances::default();
    let pair = cfg.kernel.build(eps, grid)?;
    let rows = liouville_oracle(&pair, &cfg.initial_density(grid)?, &sde, cfg.liouville.replicas, &tol)?;
    let times: Vec<f64> = rows.iter().map(|r| r.slice.t).collect();
    let coarse_pair = cfg.kernel.build(eps, coarse)?;
    let coarse_rows =
        liouville_entropy_series(&cfg.initial_density(coarse)?, coarse_pair.force(), sde.sigma, &times, sde.dt, &tol)?;
    let grid_error: Vec<f64> = rows.iter().zip(&coarse_rows).map(|(f, c)| (f.slice.h2 - c.h2).abs()).collect();
    Ok(vec![render(cfg, "liouville.csv", |w| write_oracle(w, &rows, &grid_error))?])
}

fn pde_compare_files(cfg: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    let grid = cfg.pde_compare_grid()?;
    let p = &cfg.pde_compare;
    let rows = pde_compare(
        &cfg.kernel,
        &p.epsilons,
        &cfg.initial_density(grid)?,
        cfg.sde.sigma,
        p.t_final,
        cfg.sde.dt,
        p.outputs,
        &Tolerances::default(),
    )?;
    Ok(vec![render(cfg, "pde_compare.csv", |w| write_pde_compare(w, &rows))?])
}

/// Computes every output of `command` without touching the file system.
pub fn execute(command: Command, cfg: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    cfg.validate_for(command)?;
    let mut files = match command {
        Command::Simulate => sweep_files(cfg, &run_sweep(cfg)?)?,
        Command::RateSweep => {
            let out = run_sweep(cfg)?;
            let mut files = sweep_files(cfg, &out)?;
            files.extend(rate_files(cfg, &out)?);
            files
        }
        Command::KernelCheck => kernel_check_files(cfg)?,
        Command::LiouvilleOracle => liouville_files(cfg)?,
        Command::PdeCompare => pde_compare_files(cfg)?,
    };
    let mut resolved = header(cfg);
    resolved.extend_from_slice(cfg.canonical_toml().as_bytes());
    files.push(OutputFile {
        name: "config.toml",
        bytes: resolved,
    });
    Ok(files)
}

pub fn write_outputs(dir: &Path, files: &[OutputFile]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for f in files {
        std::fs::write(dir.join(f.name), &f.bytes)?;
    }
    Ok(())
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Validation => 2,
        ErrorClass::Numerical => 3,
        ErrorClass::Io => 4,
    }
}

fn error_json(e: &Error) -> String {
    let class = match e.class() {
        ErrorClass::Validation => "validation",
        ErrorClass::Numerical => "numerical",
        ErrorClass::Io => "io",
    };
    json!({ "error": e.kind(), "class": class, "message": e.to_string() }).to_string()
}

fn run_parsed(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| match e {
            Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
            other => other,
        })?,
        None => ExperimentConfig::default(),
    }
    .with_overrides(cli);
    let threads = cli.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let files = pool.install(|| execute(cli.command, &cfg))?;
    write_outputs(&cfg.output_dir, &files)?;
    log::info!("wrote {} files to {}", files.len(), cfg.output_dir.display());
    Ok(())
}

/// Parses `args` (including the program name) and runs the command; returns the exit code.
/// Failures print a one-line JSON object to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_parsed(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(e.class())
        }
    }
}

#[cfg(test)]
mod tests;
