//! Interacting particles and their synchronously coupled mean-field copies: per-save
//! diagnostics of a few replicas, and a snapshot of particle positions.

use chaoslab::diagnostics::{write_records, RECORD_HEADER};
use chaoslab::experiment::CoupledSetup;
use chaoslab::kernels::{bounded_confidence_pair, BoundedConfidenceRoute, EpsilonSchedule};
use chaoslab::sde::{sample_initial, KernelTable, ParticleEnsemble, SdeConfig, SNAPSHOT_HEADER};
use chaoslab::{Grid, GridFunction, Tolerances};

fn main() -> chaoslab::Result<()> {
    let grid = Grid::new(1, 8.0, 1024)?;
    let n = 512;
    let eps = EpsilonSchedule::new(0.05)?.epsilon(n);
    let pair = bounded_confidence_pair(1.0, eps, grid, BoundedConfidenceRoute::Force)?;
    let mut rho0 = GridFunction::from_fn(grid, |x| (-2.0 * x[0] * x[0]).exp())?;
    rho0.normalize_density()?;
    let cfg = SdeConfig::new(n, 0.5, 0.5, 0.01, 42, 0)?.with_save_times(vec![0.0, 0.1, 0.25, 0.5])?;

    let setup = CoupledSetup::new(pair.clone(), rho0.clone(), cfg.clone(), Tolerances::default())?;
    let records = setup.run_replicas(4)?;
    println!("{RECORD_HEADER}");
    write_records(std::io::stdout().lock(), &records)?;

    // the same dynamics stepped by hand, without the mean-field partner
    let table = KernelTable::from_pair(&pair)?;
    let init = sample_initial(&rho0, n, 42, 0, &Tolerances::default())?;
    let mut ens = ParticleEnsemble::new(init, &cfg, grid, eps)?;
    for _ in 0..cfg.steps() {
        ens.step_interacting(&table);
    }
    let mut out = Vec::new();
    ens.write_snapshot(&mut out, 0)?;
    println!("\n{SNAPSHOT_HEADER}");
    for line in String::from_utf8_lossy(&out).lines().take(5) {
        println!("{line}");
    }
    Ok(())
}
