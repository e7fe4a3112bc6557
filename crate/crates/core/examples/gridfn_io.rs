//! Grid functions: sampling, spectral convolution, derivatives and the two file formats.

use chaoslab::{FourierMultiplier, Grid, GridFunction, Norm, Spectrum};

fn main() -> chaoslab::Result<()> {
    let grid = Grid::new(1, 8.0, 256)?;
    let f = GridFunction::from_fn(grid, |x| (-x[0] * x[0]).exp())?;
    let g = GridFunction::from_fn(grid, |x| (-2.0 * x[0] * x[0]).exp())?;
    let fg = f.convolve(&g)?;
    // Gaussians convolve to a Gaussian: ∫f·∫g = π/√2
    println!("mass of f*g = {:.10} (exact {:.10})", fg.quadrature(), std::f64::consts::PI / 2f64.sqrt());
    println!("|f'|_2 = {:.6}, |f|_H1 = {:.6}", f.derivative(0)?.l2_norm(), f.sobolev_norm(1.0, Norm::L2)?);
    let smoothed = Spectrum::from_symbol(grid, &FourierMultiplier::heat(0.1))?.to_real()?.convolve(&f)?;
    println!("heat-smoothed peak {:.6}", smoothed.max());

    let dir = std::env::temp_dir();
    let (csv, bin) = (dir.join("chaoslab_f.csv"), dir.join("chaoslab_f.bin"));
    f.save_csv(&csv)?;
    f.save_binary(&bin)?;
    assert_eq!(GridFunction::load_csv(&csv)?, f);
    assert_eq!(GridFunction::load_binary(&bin)?, f);
    println!("round-tripped through {} and {}", csv.display(), bin.display());
    Ok(())
}
