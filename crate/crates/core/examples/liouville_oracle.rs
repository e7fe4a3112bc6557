//! Two particles: the exact joint law from the Liouville equation against the tensorized
//! mean-field law, next to the particle-side entropy bound.

use chaoslab::experiment::liouville_oracle;
use chaoslab::kernels::{bounded_confidence_pair, BoundedConfidenceRoute};
use chaoslab::sde::SdeConfig;
use chaoslab::{Grid, GridFunction, Tolerances};

fn main() -> chaoslab::Result<()> {
    let grid = Grid::new(1, 4.0, 128)?;
    let pair = bounded_confidence_pair(1.0, 2f64.powf(-0.05), grid, BoundedConfidenceRoute::Force)?;
    let mut rho0 = GridFunction::from_fn(grid, |x| (-2.0 * x[0] * x[0]).exp())?;
    rho0.normalize_density()?;
    let times: Vec<f64> = (0..=5).map(|i| 0.05 * i as f64).collect();
    let cfg = SdeConfig::new(2, 0.5, 0.25, 0.01, 1, 0)?.with_save_times(times)?;
    println!("t,H2,bound,bound_stderr");
    for row in liouville_oracle(&pair, &rho0, &cfg, 200, &Tolerances::default())? {
        println!("{:.2},{:.4e},{:.4e},{:.1e}", row.slice.t, row.slice.h2, row.bound.mean, row.bound.stderr);
    }
    Ok(())
}
