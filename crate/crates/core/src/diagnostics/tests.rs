use super::*;
use crate::gridfn::{Grid, Tolerances};
use crate::kernels::{bounded_confidence_pair, BoundedConfidenceRoute, PairSpec};
use crate::sde::sample_initial;

fn gaussian(grid: Grid, var: f64) -> GridFunction {
    let mut f = GridFunction::from_fn(grid, |x| (-x[0] * x[0] / (2.0 * var)).exp()).unwrap();
    f.normalize_density().unwrap();
    f
}

fn record(replica: u64, rows: Vec<SaveRow>) -> DiagnosticsRecord {
    DiagnosticsRecord {
        replica,
        n_particles: 16,
        rows,
        x1_final: 0.0,
        boundary_hits: 0,
    }
}

fn row(t: f64, l2: f64, coupling: f64, lln: f64) -> SaveRow {
    SaveRow {
        t,
        l2_moll: l2,
        l2_moll_dx: 2.0 * l2,
        modulated_energy: -l2,
        coupling_max: coupling,
        lln_defect: lln,
    }
}

#[test]
fn mollified_l2_vanishes_when_measure_matches_density() {
    let g = Grid::new(1, 4.0, 64).unwrap();
    let mu = EmpiricalMeasure::new(vec![g.coord(10), g.coord(31), g.coord(31), g.coord(50)], 1).unwrap();
    let rho = mu.deposit(g).unwrap();
    let v = gaussian(g, 0.2);
    assert!(mollified_l2(&mu, &rho, &v).unwrap().abs() < 1e-12);
}

#[test]
fn mollified_l2_by_hand_on_tiny_grid() {
    let g = Grid::new(1, 1.0, 8).unwrap();
    let h = g.spacing();
    let mu = EmpiricalMeasure::new(vec![g.coord(3)], 1).unwrap();
    let rho = GridFunction::constant(g, 0.5);
    let v = GridFunction::delta(g);
    let expect = h * ((1.0 / h - 0.5).powi(2) + 7.0 * 0.25);
    assert!((mollified_l2(&mu, &rho, &v).unwrap() - expect).abs() < 1e-12);
}

#[test]
fn initial_identity_matches_monte_carlo() {
    let g = Grid::new(1, 8.0, 1024).unwrap();
    let pair = bounded_confidence_pair(1.0, 0.2, g, BoundedConfidenceRoute::Force).unwrap();
    let rho0 = gaussian(g, 0.5);
    let n = 64;
    let exact = initial_value_identity(&rho0, pair.v(), n).unwrap();
    let samples: Vec<f64> = (0..300)
        .map(|r| {
            let xs = sample_initial(&rho0, n, 5, r, &Tolerances::default()).unwrap();
            mollified_l2(&EmpiricalMeasure::new(xs, 1).unwrap(), &rho0, pair.v()).unwrap()
        })
        .collect();
    let e = Estimate::of(&samples);
    assert!((e.mean - exact).abs() < 3.0 * e.stderr, "{} vs {exact} ± {}", e.mean, e.stderr);
}

#[test]
fn modulated_energy_matches_double_sum() {
    let g = Grid::new(1, 2.0, 16).unwrap();
    let w = GridFunction::from_fn(g, |x| (-(x[0] - 0.3).powi(2)).exp() + 0.2 * x[0]).unwrap();
    let v = GridFunction::from_fn(g, |x| 1.0 / (1.0 + (x[0] + 0.25).powi(2))).unwrap();
    let spec = PairSpec {
        mode: PairMode::Product,
        sign: 1.0,
        epsilon: 1.0,
        a_w: 0.0,
        a_v: 0.0,
        strongly_admissible: false,
        label: "test".into(),
    };
    let pair = KernelPair::new(w.clone(), Some(v.clone()), spec).unwrap();
    let mu = EmpiricalMeasure::new(vec![g.coord(2), g.coord(7), g.coord(7), g.coord(12)], 1).unwrap();
    let rho = gaussian(g, 0.4);
    let sigma = 0.7;
    let got = modulated_energy(&mu, &rho, &pair, sigma).unwrap();

    let wv = w.convolve(&v).unwrap();
    let nu = mu.deposit(g).unwrap().sub(&rho).unwrap();
    let (n, o, h) = (g.n(), g.origin_index(), g.spacing());
    let mut acc = 0.0;
    for a in 0..n {
        for b in 0..n {
            acc += wv.values()[(o + a + n - b) % n] * nu.values()[a] * nu.values()[b] * h * h;
        }
    }
    let expect = acc / (sigma * sigma);
    assert!((got - expect).abs() < 1e-10 * expect.abs().max(1.0), "{got} {expect}");
}

#[test]
fn modulated_energy_of_symmetric_pair() {
    let g = Grid::new(1, 4.0, 256).unwrap();
    let pair = bounded_confidence_pair(1.0, 0.2, g, BoundedConfidenceRoute::Potential).unwrap();
    let rho = gaussian(g, 0.5);
    let xs = sample_initial(&rho, 40, 1, 0, &Tolerances::default()).unwrap();
    let mu = EmpiricalMeasure::new(xs, 1).unwrap();
    assert!(modulated_energy(&mu, &rho, &pair, 0.5).unwrap() >= -1e-12);
    let on_nodes = EmpiricalMeasure::new(vec![g.coord(100), g.coord(140)], 1).unwrap();
    let matched = on_nodes.deposit(g).unwrap();
    assert!(modulated_energy(&on_nodes, &matched, &pair, 0.5).unwrap().abs() < 1e-12);
}

#[test]
fn lln_defect_of_single_particle() {
    let g = Grid::new(1, 4.0, 256).unwrap();
    let pair = bounded_confidence_pair(1.0, 0.2, g, BoundedConfidenceRoute::Force).unwrap();
    let table = KernelTable::from_pair(&pair).unwrap();
    let rho = gaussian(g, 0.5);
    let field = pair.force().convolve(&rho).unwrap();
    let y = 0.37;
    let expect = (table.eval(0.0) - field.evaluate_at(&[y])).abs();
    assert!((lln_defect(&[y], &table, &field) - expect).abs() < 1e-15);
    let zero = KernelTable::new(&GridFunction::zeros(g)).unwrap();
    assert_eq!(lln_defect(&[0.1, 0.5], &zero, &GridFunction::zeros(g)), 0.0);
}

#[test]
fn lln_defect_decays_like_inverse_root_n() {
    let g = Grid::new(1, 8.0, 1024).unwrap();
    let pair = bounded_confidence_pair(1.0, 0.2, g, BoundedConfidenceRoute::Force).unwrap();
    let table = KernelTable::from_pair(&pair).unwrap();
    let rho = gaussian(g, 0.5);
    let field = pair.force().convolve(&rho).unwrap();
    // root-mean-square of the per-particle defect over replicas
    let points: Vec<(f64, f64)> = [64usize, 128, 256, 512, 1024]
        .iter()
        .map(|&n| {
            let mut acc = 0.0;
            let reps = 20;
            for r in 0..reps {
                let y = sample_initial(&rho, n, 3, r, &Tolerances::default()).unwrap();
                let sums = pair_drift(&y, &table);
                acc += y
                    .iter()
                    .zip(&sums)
                    .map(|(&yi, s)| (s - field.evaluate_at(&[yi])).powi(2))
                    .sum::<f64>()
                    / n as f64;
            }
            (n as f64, (acc / reps as f64).sqrt())
        })
        .collect();
    let fit = rate_fit(&points).unwrap();
    assert!((fit.slope + 0.5).abs() < 0.1, "{}", fit.slope);
}

#[test]
fn entropy_bound_arithmetic() {
    let times = [0.0, 0.5, 1.0];
    let series = vec![vec![2.0; 3]; 8];
    let e = entropy_bound_rhs(&times, &series, 0.0, 0.5).unwrap();
    assert_eq!(e.mean, 0.0);
    let e = entropy_bound_rhs(&times, &series, 3.0, 0.5).unwrap();
    assert!((e.mean - 9.0 / 0.25 * 2.0).abs() < 1e-12);
    assert!(matches!(
        entropy_bound_rhs(&times, &series[..7], 1.0, 0.5),
        Err(Error::TooFewSamples { .. })
    ));
}

#[test]
fn wilson_interval() {
    let p = Proportion::new(0, 10);
    assert_eq!(p.frequency, 0.0);
    assert_eq!(p.lo, 0.0);
    assert!((p.hi - 0.2775).abs() < 1e-3);
    let p = Proportion::new(50, 100);
    assert!((p.lo - 0.4038).abs() < 1e-3 && (p.hi - 0.5962).abs() < 1e-3);
    assert!(Proportion::new(10, 200).significantly_below(&Proportion::new(30, 200)));
    assert!(!Proportion::new(10, 200).significantly_below(&Proportion::new(14, 200)));
}

#[test]
fn event_frequencies() {
    let recs: Vec<DiagnosticsRecord> = (0..10)
        .map(|r| record(r, vec![row(0.0, 1.0, 0.0, 0.0), row(1.0, 1.0, r as f64 / 10.0 + 0.05, 0.3)]))
        .collect();
    // α = 0: threshold 1, nothing reaches it
    assert_eq!(coupling_event_frequency(&recs, 0.0, 16).unwrap().hits, 0);
    // threshold 16^{−1/4} = 0.5: replicas 5..9
    assert_eq!(coupling_event_frequency(&recs, 0.25, 16).unwrap().hits, 5);
    // threshold 16^{−0.4} ≈ 0.33 lies above every defect
    let p = lln_event_frequency(&recs, 0.3, 0.1, 16).unwrap();
    assert_eq!((p.hits, p.total), (0, 20));
    let p = lln_event_frequency(&recs, 0.35, 0.1, 16).unwrap();
    assert_eq!(p.hits, 10);
    assert!(lln_event_frequency(&recs, 0.4, 0.1, 16).is_err());
}

#[test]
fn rate_fits() {
    let exact: Vec<(f64, f64)> = [128.0, 256.0, 512.0, 1024.0].iter().map(|&n: &f64| (n, 3.0 / n)).collect();
    let f = rate_fit(&exact).unwrap();
    assert!((f.slope + 1.0).abs() < 1e-10);
    let flat: Vec<(f64, f64)> = exact.iter().map(|p| (p.0, 2.0)).collect();
    assert!(rate_fit(&flat).unwrap().slope.abs() < 1e-12);
    let mut s = Stream::new(4, 0, Domain::Bootstrap, 0);
    let noisy: Vec<(f64, f64)> = [64.0, 128.0, 256.0, 512.0, 1024.0, 2048.0]
        .iter()
        .map(|&n: &f64| (n, n.powf(-0.5) * (1.0 + 0.01 * s.normal())))
        .collect();
    let f = rate_fit(&noisy).unwrap();
    assert!((f.slope + 0.5).abs() < 0.05);
    assert!(f.ci_lo < f.slope && f.slope < f.ci_hi);
    assert!(rate_fit(&exact[..3]).is_err());
    assert!(rate_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 1.0)]).is_err());
}

#[test]
fn predicted_rates() {
    let t = predicted_rate_table_for(0.0, 0.0, 0.4, 0.3, 2.0);
    let e: Vec<f64> = t.terms.iter().map(|x| x.1).collect();
    for (a, b) in e.iter().zip([-1.0, -0.8, -0.9, -2.0]) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((t.binding + 0.8).abs() < 1e-12);
    let t = predicted_rate_table_for(1.0, 2.5, 0.3, 0.0, 2.0);
    let e: Vec<f64> = t.terms.iter().map(|x| x.1).collect();
    for (a, b) in e.iter().zip([-1.0, -0.6, -0.8, -2.0]) {
        assert!((a - b).abs() < 1e-12);
    }
    let r = mollifier_case_rates(1.5, 0.3, 0.05, 2.0);
    let expect = [0.6 - 0.05 - 5.0 * 0.05, 0.8 - 0.15 - 2.5 * 0.05, 0.6 - 0.15 - 0.075, 2.0 - 6.0 * 0.05];
    for (a, b) in r.iter().zip(expect) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn mann_kendall() {
    let t = mann_kendall_decreasing(&[6.0, 5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
    assert_eq!(t.s, -15);
    assert!(t.decreasing && t.p_value < 0.01);
    assert!(mann_kendall_decreasing(&[6.0, 5.0, 4.5, 4.6, 2.0, 1.0]).unwrap().decreasing);
    assert!(!mann_kendall_decreasing(&[1.0, 2.0, 1.5, 2.5, 3.0, 2.0]).unwrap().decreasing);
    let tied = mann_kendall_decreasing(&[1.0, 1.0, 1.0, 1.0]).unwrap();
    assert_eq!(tied.s, 0);
    assert!(!tied.decreasing);
}

#[test]
fn marginal_entropy_of_matching_samples_is_small() {
    let g = Grid::new(1, 8.0, 512).unwrap();
    let rho = gaussian(g, 0.5);
    let v = gaussian(g, 0.05);
    let small = sample_initial(&rho, 256, 1, 0, &Tolerances::default()).unwrap();
    let big = sample_initial(&rho, 4096, 1, 0, &Tolerances::default()).unwrap();
    let a = marginal_entropy_estimate(&small, &rho, &v, 3).unwrap();
    let b = marginal_entropy_estimate(&big, &rho, &v, 3).unwrap();
    assert!(b.value < a.value);
    assert!(b.value < 0.01);
    assert!(a.lo <= a.hi && a.stderr > 0.0);
    assert!(matches!(
        marginal_entropy_estimate(&small[..63], &rho, &v, 3),
        Err(Error::TooFewSamples { .. })
    ));
}

#[test]
fn marginal_entropy_respects_pinsker() {
    let g = Grid::new(1, 8.0, 512).unwrap();
    let rho = gaussian(g, 0.5);
    let v = gaussian(g, 0.05);
    let shifted: Vec<f64> = sample_initial(&rho, 512, 2, 0, &Tolerances::default())
        .unwrap()
        .iter()
        .map(|x| x + 0.8)
        .collect();
    let est = marginal_entropy_estimate(&shifted, &rho, &v, 1).unwrap();
    let mu = EmpiricalMeasure::new(shifted, 1).unwrap();
    let kde = empirical_convolution(&mu, &v).unwrap();
    let target = v.convolve(&rho).unwrap();
    let l1 = crate::meanfield_pde::l1_distance(&kde, &target).unwrap();
    assert!(est.value >= 0.5 * l1 * l1);
}

#[test]
fn sweep_report_is_order_independent() {
    let ctx = SweepContext {
        alpha: 0.3,
        delta: 0.05,
        sigma: 0.5,
        mode: PairMode::Product,
    };
    let recs: Vec<DiagnosticsRecord> = (0..9)
        .map(|r| record(r, vec![row(0.0, 0.1 * r as f64, 0.01, 0.0), row(0.5, 0.05 + 0.01 * r as f64, 0.02, 0.0)]))
        .collect();
    let mut reversed = recs.clone();
    reversed.reverse();
    let mut a = SweepReport::default();
    a.add(16, &recs, 1.5, &ctx).unwrap();
    let mut b = SweepReport::default();
    b.add(16, &reversed, 1.5, &ctx).unwrap();
    assert_eq!(a, b);
    let sup = a.row(16, SUP_L2).unwrap();
    let expect = (0..9).map(|r| (0.1 * r as f64).max(0.05 + 0.01 * r as f64)).sum::<f64>() / 9.0;
    assert!((sup.mean - expect).abs() < 1e-15);
    let mut out = Vec::new();
    a.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("N,quantity,mean,stderr,count\n"));
    assert_eq!(text.lines().count(), 7);
    let mut out = Vec::new();
    write_records(&mut out, &reversed).unwrap();
    let first = String::from_utf8(out).unwrap().lines().next().unwrap().to_string();
    assert!(first.starts_with("16,0,"));
}
