//! The chemotactic Bessel kernel `−∇G^ε` through its heat-kernel square root.

use chaoslab::kernels::{bessel_kernel, bessel_pair, make_mollifier, BesselRoute, MollifierSpec};
use chaoslab::Grid;

fn main() -> chaoslab::Result<()> {
    let grid = Grid::new(1, 8.0, 1024)?;
    let g = bessel_kernel(grid)?;
    // G(x) = e^{−|x|}/2 in one dimension
    println!("G(0) = {:.6} (exact 0.5), G(1) = {:.6} (exact {:.6})", g.evaluate_at(&[0.0]), g.evaluate_at(&[1.0]), (-1f64).exp() / 2.0);
    for eps in [0.2, 0.1, 0.05, 0.025] {
        let pair = bessel_pair(eps, grid, BesselRoute::Weierstrass)?;
        let target = g.convolve(&make_mollifier(MollifierSpec::gaussian(eps), grid)?)?;
        let vv = pair.v().convolve(pair.v())?;
        let rel = vv.sub(&target)?.l2_norm() / target.l2_norm();
        println!("eps={eps:<6} |V*V - G*h|/|G*h| = {rel:.2e}  max|k_eps| = {:.4}", pair.force().max_abs());
    }
    Ok(())
}
