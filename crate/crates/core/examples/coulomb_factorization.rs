//! Square-root factorization of the mollified Newtonian potential in three dimensions.

use chaoslab::kernels::{coulomb_factorization_residual, coulomb_factorized_pair, CoulombRoute, MollifierBase};
use chaoslab::Grid;

fn main() -> chaoslab::Result<()> {
    let grid = Grid::new(3, 4.0, 64)?;
    for route in [CoulombRoute::WeierstrassSqrt, CoulombRoute::FourierSqrt(MollifierBase::Gaussian)] {
        for eps in [0.2, 0.1, 0.05] {
            let pair = coulomb_factorized_pair(eps, grid, route)?;
            let res = coulomb_factorization_residual(&pair)?;
            println!("{:<22} eps={eps:<5} residual={res:.3e} |V|_H2={:.4e}", pair.label(), pair.v_norm_h2()?);
        }
    }
    Ok(())
}
