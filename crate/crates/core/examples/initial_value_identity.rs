//! At t = 0 the particles are i.i.d., so the mean squared mollified distance has a closed
//! form; compares it with a Monte Carlo estimate.

use chaoslab::diagnostics::{initial_value_identity, mollified_l2, Estimate};
use chaoslab::kernels::{make_mollifier, MollifierSpec};
use chaoslab::sde::{sample_initial, EmpiricalMeasure};
use chaoslab::{Grid, GridFunction, Tolerances};

fn main() -> chaoslab::Result<()> {
    let grid = Grid::new(1, 8.0, 1024)?;
    let mut rho0 = GridFunction::from_fn(grid, |x| (-2.0 * x[0] * x[0]).exp())?;
    rho0.normalize_density()?;
    let v = make_mollifier(MollifierSpec::bump(0.5), grid)?;
    for n in [64, 256, 1024] {
        let samples: Vec<f64> = (0..300)
            .map(|r| {
                let x = sample_initial(&rho0, n, 5, r, &Tolerances::default())?;
                mollified_l2(&EmpiricalMeasure::new(x, 1)?, &rho0, &v)
            })
            .collect::<chaoslab::Result<_>>()?;
        let mc = Estimate::of(&samples);
        let exact = initial_value_identity(&rho0, &v, n)?;
        println!("N={n:<5} MC {:.4e} +- {:.1e}   exact {exact:.4e}", mc.mean, mc.stderr);
    }
    Ok(())
}
