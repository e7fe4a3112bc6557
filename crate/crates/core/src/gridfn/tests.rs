use std::f64::consts::PI;

use proptest::prelude::*;
use rustfft::num_complex::Complex64;

use super::*;

fn grid1(l: f64, n: usize) -> Grid {
    Grid::new(1, l, n).unwrap()
}

fn gaussian(grid: Grid, var: f64) -> GridFunction {
    GridFunction::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (-r2 / (2.0 * var)).exp() / (2.0 * PI * var).powf(grid.dim() as f64 / 2.0)
    })
    .unwrap()
}

#[test]
fn grid_rejects_bad_shapes() {
    assert!(Grid::new(0, 1.0, 8).is_err());
    assert!(Grid::new(4, 1.0, 8).is_err());
    assert!(Grid::new(1, 1.0, 12).is_err());
    assert!(Grid::new(1, 1.0, 4).is_err());
    assert!(Grid::new(1, -1.0, 8).is_err());
}

#[test]
fn grid_geometry() {
    let g = Grid::new(2, 2.0, 8).unwrap();
    assert_eq!(g.spacing(), 0.5);
    assert_eq!(g.coord(g.origin_index()), 0.0);
    assert_eq!(g.len(), 64);
    let mut m = [0; MAX_DIM];
    g.unravel(g.ravel(&[3, 5]), &mut m);
    assert_eq!(&m[..2], &[3, 5]);
    assert_eq!(g.frequency(1), 0.25);
    assert_eq!(g.frequency(7), -0.25);
    assert_eq!(g.frequency(4), -1.0);
    assert_eq!(g.wrap(2.0), -2.0);
    assert_eq!(g.wrap(-2.5), 1.5);
    assert_eq!(g.wrap(0.25), 0.25);
}

#[test]
fn quadrature_trivial_cases() {
    let g = grid1(1.0, 64);
    assert_eq!(GridFunction::zeros(g).quadrature(), 0.0);
    assert!((GridFunction::constant(g, 1.0).quadrature() - 2.0).abs() < 1e-15);
}

#[test]
fn quadrature_of_gaussian_matches_erf() {
    let g = grid1(8.0, 256);
    let f = gaussian(g, 1.0);
    // mass of N(0,1) on [−8, 8]
    let exact = statrs::function::erf::erf(8.0 / 2f64.sqrt());
    assert!((f.quadrature() - exact).abs() < 1e-12);
    assert!((f.quadrature() - 1.0).abs() < 1e-12);
}

#[test]
fn convolve_with_delta_is_identity() {
    for dim in 1..=3 {
        let g = Grid::new(dim, 3.0, 16).unwrap();
        let f = GridFunction::from_fn(g, |x| (x[0] - 0.3).sin() + x.iter().sum::<f64>().cos()).unwrap();
        let c = f.convolve(&GridFunction::delta(g)).unwrap();
        for (a, b) in c.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-12, "dim {dim}: {a} vs {b}");
        }
    }
}

#[test]
fn convolve_indicators_gives_tent() {
    let g = grid1(4.0, 512);
    let h = g.spacing();
    let ind = GridFunction::from_fn(g, |x| if x[0].abs() <= 0.5 { 1.0 } else { 0.0 }).unwrap();
    let tent = ind.convolve(&ind).unwrap();
    let err = g
        .axis()
        .iter()
        .zip(tent.values())
        .map(|(x, v)| (v - (1.0 - x.abs()).max(0.0)).abs())
        .fold(0.0, f64::max);
    assert!(err <= 2.0 * h, "err {err} vs 2h {}", 2.0 * h);
}

#[test]
fn convolve_rejects_mismatched_grids() {
    let a = GridFunction::zeros(grid1(1.0, 8));
    let b = GridFunction::zeros(grid1(1.0, 16));
    assert!(matches!(a.convolve(&b), Err(Error::GridMismatch(_))));
}

#[test]
fn off_origin_shift_is_exact() {
    // convolving with a delta at node x0 shifts by x0
    let g = grid1(2.0, 32);
    let f = gaussian(g, 0.1);
    let mut d = GridFunction::zeros(g);
    d.values_mut()[g.origin_index() + 3] = 1.0 / g.spacing();
    let c = f.convolve(&d).unwrap();
    for j in 0..32 {
        let src = (j + 32 - 3) % 32;
        assert!((c.values()[j] - f.values()[src]).abs() < 1e-12);
    }
}

#[test]
fn identity_multiplier_is_identity() {
    let g = Grid::new(2, 2.0, 16).unwrap();
    let f = gaussian(g, 0.3);
    let out = f.apply_multiplier(&FourierMultiplier::identity()).unwrap();
    for (a, b) in out.values().iter().zip(f.values()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn derivative_multiplier_is_exact_for_band_limited() {
    let l = 2.0;
    let g = grid1(l, 64);
    let k = 3.0;
    let f = GridFunction::from_fn(g, |x| (2.0 * PI * x[0] * k / (2.0 * l)).sin()).unwrap();
    let df = f.derivative(0).unwrap();
    for (x, v) in g.axis().iter().zip(df.values()) {
        let exact = 2.0 * PI * k / (2.0 * l) * (2.0 * PI * x * k / (2.0 * l)).cos();
        assert!((v - exact).abs() < 1e-8);
    }
}

#[test]
fn bessel_kernel_integrates_to_one() {
    let g = grid1(16.0, 1024);
    let gk = GridFunction::delta(g)
        .apply_multiplier(&FourierMultiplier::bessel(-2.0))
        .unwrap();
    assert!((gk.quadrature() - 1.0).abs() < 1e-3);
    // 1D Bessel kernel e^{−|x|}/2
    let x = 1.0;
    assert!((gk.evaluate_at(&[x]) - (-x as f64).exp() / 2.0).abs() < 1e-3);
}

#[test]
fn non_finite_symbol_off_origin_is_an_error() {
    let g = grid1(1.0, 16);
    let m = FourierMultiplier::real(|xi| if xi[0] > 0.0 { f64::INFINITY } else { 1.0 });
    assert!(matches!(
        GridFunction::constant(g, 1.0).apply_multiplier(&m),
        Err(Error::NonFiniteSymbol { .. })
    ));
    // at the origin it is regularized to 0
    let m0 = FourierMultiplier::real(|xi| 1.0 / xi[0].abs());
    assert!(GridFunction::constant(g, 1.0).apply_multiplier(&m0).is_ok());
}

#[test]
fn inverse_abs_removes_mean() {
    let g = Grid::new(3, 2.0, 16).unwrap();
    let f = gaussian(g, 0.2);
    let out = f.apply_multiplier(&FourierMultiplier::inverse_abs()).unwrap();
    assert!(out.quadrature().abs() < 1e-10);
}

#[test]
fn sobolev_norm_basics() {
    let g = grid1(4.0, 64);
    let z = GridFunction::zeros(g);
    for p in [Norm::L1, Norm::L2, Norm::Inf] {
        assert_eq!(z.sobolev_norm(1.0, p).unwrap(), 0.0);
    }
    let f = gaussian(g, 0.5);
    let l2 = f.mul(&f).unwrap().quadrature().sqrt();
    assert!((f.sobolev_norm(0.0, Norm::L2).unwrap() - l2).abs() < 1e-12);
    assert!(matches!(f.sobolev_norm(0.5, Norm::L1), Err(Error::UnsupportedNorm { .. })));
    assert!(f.sobolev_norm(2.0, Norm::Inf).is_ok());
}

#[test]
fn h1_norm_of_gaussian_matches_closed_form() {
    // F[f](ξ) = exp(−2π²ξ²); ∫(1+4π²ξ²)exp(−4π²ξ²)dξ = 1/(2√π) + 1/(4√π)
    let g = grid1(8.0, 512);
    let f = gaussian(g, 1.0);
    let exact = (3.0 / (4.0 * PI.sqrt())).sqrt();
    assert!((f.sobolev_norm(1.0, Norm::L2).unwrap() - exact).abs() < 1e-6);
}

#[test]
fn plancherel_with_pinned_convention() {
    let g = Grid::new(2, 3.0, 32).unwrap();
    let f = GridFunction::from_fn(g, |x| (-(x[0] - 0.4).powi(2) - 2.0 * x[1] * x[1]).exp() * (1.0 + x[0])).unwrap();
    let direct = f.mul(&f).unwrap().quadrature();
    // raw FFT, no normalization: Σ|FFT|² = n^dim Σ|f|²
    let mut raw: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::fft_nd(&mut raw, g.n(), g.dim(), false);
    let raw_sum: f64 = raw.iter().map(|c| c.norm_sqr()).sum();
    let via_raw = g.cell_volume().powi(2) * raw_sum / (2.0 * g.half_width()).powi(2);
    assert!((via_raw - direct).abs() / direct < 1e-10);
    let via_spec = Spectrum::of(&f).l2_norm_squared();
    assert!((via_spec - direct).abs() / direct < 1e-10);
}

#[test]
fn spectrum_of_gaussian_is_continuous_transform() {
    // F[N(0,v)](ξ) = exp(−2π² v ξ²), sampled at grid frequencies
    let g = grid1(8.0, 256);
    let v = 0.7;
    let s = Spectrum::of(&gaussian(g, v));
    for (k, c) in s.coeffs().iter().enumerate() {
        let xi = g.frequency(k);
        assert!((c.re - (-2.0 * PI * PI * v * xi * xi).exp()).abs() < 1e-12);
        assert!(c.im.abs() < 1e-12);
    }
}

#[test]
fn evaluate_at_nodes_and_linear_functions() {
    let g = Grid::new(2, 1.0, 16).unwrap();
    let f = GridFunction::from_fn(g, |x| 2.0 * x[0] - 0.5 * x[1] + 0.25).unwrap();
    assert_eq!(f.evaluate_at(&[g.coord(3), g.coord(9)]), f.values()[g.ravel(&[3, 9])]);
    for &(a, b) in &[(0.013, -0.4), (-0.77, 0.61), (0.5, 0.5)] {
        assert!((f.evaluate_at(&[a, b]) - (2.0 * a - 0.5 * b + 0.25)).abs() < 1e-12);
    }
}

#[test]
fn interpolation_error_is_second_order() {
    let f = |x: f64| (1.3 * x).sin() * (-x * x / 4.0).exp();
    let probes: Vec<f64> = (0..997).map(|i| -2.9 + 0.005813 * i as f64).collect();
    let err = |n: usize| {
        let g = grid1(4.0, n);
        let gf = GridFunction::from_fn(g, |x| f(x[0])).unwrap();
        probes
            .iter()
            .map(|&x| (gf.evaluate_at(&[x]) - f(x)).abs())
            .fold(0.0, f64::max)
    };
    let ratio = err(128) / err(256);
    assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
}

#[test]
fn deposit_matches_interpolation_weights() {
    let g = grid1(2.0, 16);
    let x0 = g.coord(5);
    let d = GridFunction::deposit(g, &[x0]).unwrap();
    assert_eq!(d.values()[5], 1.0 / g.spacing());
    let d2 = GridFunction::deposit(g, &[0.1, -0.33, 1.2]).unwrap();
    assert!((d2.quadrature() - 1.0).abs() < 1e-14);
    // ∫ deposit · f = mean of interpolated f
    let f = GridFunction::from_fn(g, |x| x[0].cos()).unwrap();
    let expect = [0.1, -0.33, 1.2].iter().map(|&x| f.evaluate_at(&[x])).sum::<f64>() / 3.0;
    assert!((d2.inner(&f).unwrap() - expect).abs() < 1e-14);
}

#[test]
fn density_checks() {
    let g = grid1(8.0, 256);
    let tol = Tolerances::default();
    let f = gaussian(g, 1.0);
    assert!(f.check_density(&tol).is_ok());
    assert!(f.scale(2.0).unwrap().check_density(&tol).is_err());
    let mut neg = f.clone();
    neg.values_mut()[0] = -1e-6;
    assert!(neg.check_density(&tol).is_err());
    assert!(f.boundary_mass() < 1e-8);
    assert!(GridFunction::constant(g, 1.0 / 16.0).boundary_mass() > 1e-3);
}

#[test]
fn csv_and_binary_round_trip_bit_exactly() {
    let g = Grid::new(2, 1.5, 8).unwrap();
    let f = GridFunction::from_fn(g, |x| (x[0] * 7.1).sin() * 1e-300 + x[1] / 3.0 - 0.0).unwrap();
    let mut csv = Vec::new();
    f.write_csv(&mut csv).unwrap();
    assert!(csv.starts_with(b"# dim,L,n\n"));
    let back = GridFunction::read_csv(&csv[..]).unwrap();
    assert_eq!(back.grid(), f.grid());
    for (a, b) in back.values().iter().zip(f.values()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    let mut bin = Vec::new();
    f.write_binary(&mut bin).unwrap();
    assert_eq!(bin.len(), 32 + 8 * g.len());
    assert_eq!(&bin[..4], b"CHGF");
    let back = GridFunction::read_binary(&bin[..]).unwrap();
    assert_eq!(back, f);
    assert!(GridFunction::read_binary(&bin[..40]).is_err());
}

#[test]
fn reflect_is_point_reflection() {
    let g = grid1(1.0, 8);
    let f = GridFunction::from_fn(g, |x| x[0]).unwrap();
    let r = f.reflect();
    // node −L has no mirror on the grid and maps to itself
    assert_eq!(r.values()[0], f.values()[0]);
    for j in 1..8 {
        assert_eq!(r.values()[j], -f.values()[j]);
    }
}

fn arb_field(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn convolve_commutative_and_bilinear(a in arb_field(32), b in arb_field(32), c in arb_field(32), s in -2.0f64..2.0) {
        let g = grid1(2.0, 32);
        let fa = GridFunction::new(g, a).unwrap();
        let fb = GridFunction::new(g, b).unwrap();
        let fc = GridFunction::new(g, c).unwrap();
        let ab = fa.convolve(&fb).unwrap();
        let ba = fb.convolve(&fa).unwrap();
        for (x, y) in ab.values().iter().zip(ba.values()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let lhs = fa.scale(s).unwrap().add(&fc).unwrap().convolve(&fb).unwrap();
        let rhs = ab.scale(s).unwrap().add(&fc.convolve(&fb).unwrap()).unwrap();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn multiplier_composition(a in arb_field(64), s1 in -2.0f64..2.0, s2 in -2.0f64..2.0) {
        let g = Grid::new(2, 1.0, 8).unwrap();
        let f = GridFunction::new(g, a).unwrap();
        let m1 = FourierMultiplier::bessel(s1);
        let m2 = FourierMultiplier::heat(0.01).compose(&FourierMultiplier::bessel(s2));
        let both = f.apply_multiplier(&m1.compose(&m2)).unwrap();
        let seq = f.apply_multiplier(&m1).unwrap().apply_multiplier(&m2).unwrap();
        let scale = both.max_abs().max(1.0);
        for (x, y) in both.values().iter().zip(seq.values()) {
            prop_assert!((x - y).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn sobolev_monotone_in_s(a in arb_field(32), s1 in 0.0f64..3.0, ds in 0.0f64..2.0) {
        let f = GridFunction::new(grid1(1.0, 32), a).unwrap();
        let lo = f.sobolev_norm(s1, Norm::L2).unwrap();
        let hi = f.sobolev_norm(s1 + ds, Norm::L2).unwrap();
        prop_assert!(lo <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn wrap_lands_in_domain(x in -100.0f64..100.0) {
        let g = grid1(1.7, 16);
        let y = g.wrap(x);
        prop_assert!((-1.7..1.7).contains(&y));
        let k = ((x - y) / 3.4).round();
        prop_assert!((x - y - 3.4 * k).abs() < 1e-9);
    }
}
