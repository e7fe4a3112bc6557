use super::*;
use crate::kernels::{bounded_confidence_pair, BoundedConfidenceRoute};

fn gaussian(grid: Grid, mean: f64, var: f64) -> GridFunction {
    let c = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
    GridFunction::from_fn(grid, |x| c * (-(x[0] - mean).powi(2) / (2.0 * var)).exp()).unwrap()
}

fn normalized(mut f: GridFunction) -> GridFunction {
    f.normalize_density().unwrap();
    f
}

fn bc_force(grid: Grid, eps: f64) -> GridFunction {
    bounded_confidence_pair(1.0, eps, grid, BoundedConfidenceRoute::Force)
        .unwrap()
        .force()
        .clone()
}

#[test]
fn pure_diffusion_matches_heat_kernel() {
    let g = Grid::new(1, 8.0, 512).unwrap();
    let (v0, sigma, t) = (0.5, 1.0, 0.5);
    let mut s = PdeState::new(normalized(gaussian(g, 0.0, v0)), sigma, GridFunction::zeros(g), &Tolerances::default()).unwrap();
    s.advance_to(t, 0.01).unwrap();
    assert_eq!(s.time(), t);
    let exact = gaussian(g, 0.0, v0 + sigma * sigma * t);
    let err = l1_distance(s.rho(), &exact).unwrap();
    assert!(err < 1e-3, "{err}");
}

#[test]
fn mass_is_conserved_over_many_steps() {
    let g = Grid::new(1, 8.0, 512).unwrap();
    let mut s = PdeState::new(normalized(gaussian(g, 0.3, 0.4)), 0.5, bc_force(g, 0.2), &Tolerances::default()).unwrap();
    for _ in 0..1000 {
        s.step(1e-3).unwrap();
    }
    assert!((s.rho().quadrature() - 1.0).abs() <= 1e-10);
    assert!(s.rho().min() >= 0.0);
    assert!(s.renormalization() <= 1e-8, "{}", s.renormalization());
}

#[test]
fn odd_kernel_preserves_even_density() {
    let g = Grid::new(1, 8.0, 512).unwrap();
    let rho0 = normalized(GridFunction::from_fn(g, |x| (-(x[0].abs() - 1.0).powi(2) * 2.0).exp()).unwrap());
    let mut s = PdeState::new(rho0, 0.4, bc_force(g, 0.2), &Tolerances::default()).unwrap();
    s.advance_to(0.5, 0.01).unwrap();
    let defect = s.rho().sub(&s.rho().reflect()).unwrap().max_abs();
    assert!(defect < 1e-9, "{defect}");
}

#[test]
fn attraction_contracts_the_density() {
    let g = Grid::new(1, 8.0, 512).unwrap();
    let rho0 = normalized(gaussian(g, 0.0, 0.3));
    let second_moment = |f: &GridFunction| {
        let x2 = GridFunction::from_fn(*f.grid(), |x| x[0] * x[0]).unwrap();
        f.inner(&x2).unwrap()
    };
    let m0 = second_moment(&rho0);
    let mut s = PdeState::new(rho0, 0.0, bc_force(g, 0.2), &Tolerances::default()).unwrap();
    s.advance_to(0.5, 0.01).unwrap();
    assert!(second_moment(s.rho()) < m0);
}

#[test]
fn cfl_violation_reports_admissible_step() {
    let g = Grid::new(1, 4.0, 256).unwrap();
    let s = PdeState::new(normalized(gaussian(g, 0.0, 0.3)), 0.5, GridFunction::constant(g, 2.0), &Tolerances::default()).unwrap();
    let admissible = s.admissible_dt().unwrap();
    assert!((admissible - g.spacing() / 4.0).abs() < 1e-12);
    match pde_step(&s, 2.0 * admissible) {
        Err(Error::Cfl { admissible_dt, .. }) => assert!((admissible_dt - admissible).abs() < 1e-12),
        other => panic!("{other:?}"),
    }
}

#[test]
fn advection_diffusion_converges_at_second_order() {
    // k ≡ c gives k * ρ = c, so the exact solution is a Gaussian drifting with speed −c
    let (c, sigma, v0, t) = (1.0, 0.5, 0.2, 1.0);
    let error = |n: usize| {
        let g = Grid::new(1, 4.0, n).unwrap();
        let mut s =
            PdeState::new(normalized(gaussian(g, 0.5, v0)), sigma, GridFunction::constant(g, c), &Tolerances::default()).unwrap();
        s.advance_to(t, 0.2 * g.spacing()).unwrap();
        let exact = gaussian(g, 0.5 - c * t, v0 + sigma * sigma * t);
        l1_distance(s.rho(), &exact).unwrap()
    };
    let (coarse, fine) = (error(128), error(256));
    assert!(coarse / fine >= 3.0, "{coarse} {fine}");
}

#[test]
fn free_liouville_is_a_tensor_product() {
    let g = Grid::new(1, 6.0, 128).unwrap();
    let sigma = 1.0;
    let rho0 = normalized(gaussian(g, 0.0, 0.5));
    let mut l = LiouvilleState2::from_initial(&rho0, &Tolerances::default()).unwrap();
    let vel = LiouvilleVelocity::new(&GridFunction::zeros(g)).unwrap();
    l.advance_to(&vel, sigma, 0.5, 0.05).unwrap();
    let mut one = PdeState::new(rho0, sigma, GridFunction::zeros(g), &Tolerances::default()).unwrap();
    one.advance_to(0.5, 0.05).unwrap();
    let tensor = tensor_product(one.rho(), one.rho()).unwrap();
    let err = l1_distance(l.rho2(), &tensor).unwrap();
    assert!(err < 1e-3, "{err}");
}

#[test]
fn interacting_liouville_stays_symmetric() {
    let g = Grid::new(1, 4.0, 128).unwrap();
    let rho0 = normalized(gaussian(g, 0.2, 0.3));
    let mut l = LiouvilleState2::from_initial(&rho0, &Tolerances::default()).unwrap();
    let vel = LiouvilleVelocity::new(&bc_force(g, 0.25)).unwrap();
    let dt = 0.5 * vel.admissible_dt().min(0.01);
    for _ in 0..500 {
        l.step(&vel, 0.5, dt).unwrap();
    }
    assert!(l.symmetry_defect() <= 1e-9, "{}", l.symmetry_defect());
    assert!((l.rho2().quadrature() - 1.0).abs() <= 1e-10);
    let m1 = marginal(&l).unwrap();
    let m2 = marginal_of(l.rho2(), 1).unwrap();
    assert!(m1.sub(&m2).unwrap().max_abs() < 1e-9);
}

#[test]
fn liouville_step_rejects_large_steps() {
    let g = Grid::new(1, 4.0, 32).unwrap();
    let pair = bounded_confidence_pair(1.0, 1.0, g, BoundedConfidenceRoute::Force).unwrap();
    let l = LiouvilleState2::from_initial(&normalized(gaussian(g, 0.0, 0.5)), &Tolerances::default()).unwrap();
    assert!(matches!(liouville2_step(&l, &pair, 0.5, 10.0), Err(Error::Cfl { .. })));
    assert!(liouville2_step(&l, &pair, 0.5, 1e-3).is_ok());
}

#[test]
fn marginal_of_tensor_product() {
    let g = Grid::new(1, 4.0, 64).unwrap();
    let a = normalized(gaussian(g, 0.5, 0.3));
    let b = normalized(gaussian(g, -0.5, 0.6));
    let ab = tensor_product(&a, &b).unwrap();
    assert!(marginal_of(&ab, 0).unwrap().sub(&a).unwrap().max_abs() < 1e-12);
    assert!(marginal_of(&ab, 1).unwrap().sub(&b).unwrap().max_abs() < 1e-12);
    let l = LiouvilleState2::new(ab.clone(), &Tolerances::default()).unwrap();
    assert!((marginal(&l).unwrap().quadrature() - ab.quadrature()).abs() < 1e-12);
}

#[test]
fn entropy_of_gaussians() {
    let g = Grid::new(1, 10.0, 2048).unwrap();
    let p = normalized(gaussian(g, 0.0, 0.5));
    assert!(relative_entropy(&p, &p).unwrap().abs() < 1e-12);
    let (m1, m2, v) = (0.3, -0.4, 0.5);
    let q = normalized(gaussian(g, m2, v));
    let p = normalized(gaussian(g, m1, v));
    let kl = relative_entropy(&p, &q).unwrap();
    assert!((kl - (m1 - m2) * (m1 - m2) / (2.0 * v)).abs() < 1e-4, "{kl}");
    let tv = l1_distance(&p, &q).unwrap();
    assert!(tv * tv <= 2.0 * kl + 1e-8);
}

#[test]
fn entropy_is_nonnegative_and_floors_vanishing_reference() {
    let g = Grid::new(1, 4.0, 128).unwrap();
    let p = normalized(GridFunction::from_fn(g, |x| 1.0 + (2.0 * x[0]).sin().abs()).unwrap());
    let q = normalized(GridFunction::from_fn(g, |x| (-(x[0] * x[0])).exp()).unwrap());
    assert!(relative_entropy(&p, &q).unwrap() >= -1e-10);
    assert!(relative_entropy(&q, &p).unwrap() >= -1e-10);
    let narrow = normalized(gaussian(g, 0.0, 0.001));
    let wide = normalized(gaussian(g, 0.0, 1.0));
    let h = relative_entropy(&wide, &narrow).unwrap();
    assert!(h.is_finite() && h > 0.0);
}

#[test]
fn l1_of_disjoint_masses() {
    let g = Grid::new(1, 4.0, 64).unwrap();
    let p = normalized(GridFunction::from_fn(g, |x| if x[0] < -1.0 { 1.0 } else { 0.0 }).unwrap());
    let q = normalized(GridFunction::from_fn(g, |x| if x[0] > 1.0 { 1.0 } else { 0.0 }).unwrap());
    assert!((l1_distance(&p, &q).unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(l1_distance(&p, &p).unwrap(), 0.0);
}

#[test]
fn deregularization_residual_values() {
    let g = Grid::new(1, 4.0, 256).unwrap();
    let rho = normalized(gaussian(g, 0.0, 0.3));
    let k = bc_force(g, 0.2);
    assert_eq!(deregularization_residual(&k, &k, &rho).unwrap(), 0.0);
    let shifted = k.map(|v| v + 0.5).unwrap();
    let r = deregularization_residual(&k, &shifted, &rho).unwrap();
    assert!((r - 0.25).abs() < 1e-12, "{r}");
}

#[test]
fn series_csv_layout() {
    let g = Grid::new(1, 4.0, 32).unwrap();
    let rho = normalized(gaussian(g, 0.0, 0.5));
    let row = PdeSeriesRow::new(&rho, 0.0, &rho).unwrap();
    let mut out = Vec::new();
    write_series(&mut out, &[row]).unwrap();
    let s = String::from_utf8(out).unwrap();
    let mut lines = s.lines();
    assert_eq!(lines.next(), Some(SERIES_HEADER));
    assert_eq!(lines.next().unwrap().split(',').count(), 5);
}
