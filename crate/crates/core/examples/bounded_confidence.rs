//! Both factorizations of the bounded-confidence kernel and their distance to the raw force.
//! Writes the mollified force to `bc_force.csv` in the working directory.

use chaoslab::kernels::{bounded_confidence_force, bounded_confidence_pair, BoundedConfidenceRoute};
use chaoslab::Grid;

fn main() -> chaoslab::Result<()> {
    let grid = Grid::new(1, 4.0, 1024)?;
    let k = bounded_confidence_force(1.0, grid)?;
    for route in [BoundedConfidenceRoute::Force, BoundedConfidenceRoute::Potential] {
        for eps in [0.4, 0.2, 0.1, 0.05] {
            let pair = bounded_confidence_pair(1.0, eps, grid, route)?;
            let l1 = pair.force().sub(&k)?.lp_norm(chaoslab::Norm::L1);
            println!("{:<30} eps={eps:<5} |k_eps - k|_1 = {l1:.4e}  C_W={:.3} C_V={:.3}", pair.label(), pair.c_w(), pair.c_v());
        }
    }
    bounded_confidence_pair(1.0, 0.1, grid, BoundedConfidenceRoute::Force)?
        .force()
        .save_csv("bc_force.csv")?;
    println!("wrote bc_force.csv");
    Ok(())
}
