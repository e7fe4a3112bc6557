//! Regularized against unregularized mean-field solutions for shrinking ε.

use chaoslab::experiment::{pde_compare, KernelFamily};
use chaoslab::{Grid, GridFunction, Tolerances};

fn main() -> chaoslab::Result<()> {
    let grid = Grid::new(1, 4.0, 2048)?;
    let mut rho0 = GridFunction::from_fn(grid, |x| (-2.0 * x[0] * x[0]).exp())?;
    rho0.normalize_density()?;
    let rows = pde_compare(&KernelFamily::default(), &[0.2, 0.1, 0.05, 0.025], &rho0, 0.5, 0.5, 0.01, 10, &Tolerances::default())?;
    println!("eps,l1_T,int_l1,residual");
    for r in rows {
        println!("{},{:.4e},{:.4e},{:.4e}", r.epsilon, r.l1_final, r.l1_integrated, r.residual);
    }
    Ok(())
}
