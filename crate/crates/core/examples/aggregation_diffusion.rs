//! Regularized aggregation-diffusion equation with the bounded-confidence kernel; prints a
//! time series of mass, minimum and distance to the initial density as CSV.

use chaoslab::kernels::{bounded_confidence_pair, BoundedConfidenceRoute};
use chaoslab::meanfield_pde::{write_series, PdeSeriesRow, PdeState};
use chaoslab::{Grid, GridFunction, Tolerances};

fn main() -> chaoslab::Result<()> {
    let grid = Grid::new(1, 8.0, 1024)?;
    let pair = bounded_confidence_pair(1.0, 0.2, grid, BoundedConfidenceRoute::Force)?;
    let mut rho0 = GridFunction::from_fn(grid, |x| (-(x[0] - 1.0).powi(2)).exp() + (-(x[0] + 1.0).powi(2)).exp())?;
    rho0.normalize_density()?;
    let mut state = PdeState::from_pair(rho0.clone(), 0.3, &pair, &Tolerances::default())?;
    let mut rows = vec![PdeSeriesRow::new(state.rho(), 0.0, &rho0)?];
    for i in 1..=20 {
        state.advance_to(0.1 * i as f64, 0.01)?;
        rows.push(PdeSeriesRow::new(state.rho(), state.time(), &rho0)?);
    }
    write_series(std::io::stdout().lock(), &rows)?;
    eprintln!("clip events: {}, total renormalization {:e}", state.clip_events(), state.renormalization());
    Ok(())
}
