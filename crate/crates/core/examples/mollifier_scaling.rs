//! Norm blow-up of the standard bump `J^ε` as ε shrinks, fitted on a log-log scale.

use chaoslab::kernels::{certify_mollifier_scaling, MollifierBase};
use chaoslab::Grid;

fn main() -> chaoslab::Result<()> {
    let grid = Grid::new(1, 2.0, 4096)?;
    let eps: Vec<f64> = (3..=7).map(|k| 2f64.powi(-k)).collect();
    for m in 0..=2 {
        let fit = certify_mollifier_scaling(MollifierBase::StandardBump, &eps, grid, m)?;
        println!("H^{m}: slope {:.4}", fit.slope());
        for (e, v) in fit.epsilons.iter().zip(&fit.norms) {
            println!("  eps={e:<10} norm={v:.6e}");
        }
    }
    Ok(())
}
