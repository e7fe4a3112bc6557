//! Estimators for the particle/mean-field comparison, Monte Carlo aggregation over replicas,
//! and convergence-rate fits in `N`.

use std::collections::BTreeMap;
use std::io::Write;

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{invalid, Error, Result};
use crate::gridfn::GridFunction;
use crate::kernels::{KernelPair, PairMode};
use crate::meanfield_pde::relative_entropy;
use crate::numerics::{compensated_sum, fit_line};
use crate::rng::{Domain, Stream};
use crate::sde::{empirical_convolution, pair_drift, EmpiricalMeasure, KernelTable};

/// Replicas required before a Monte Carlo mean is reported.
pub const MIN_REPLICAS: usize = 8;
/// Pooled samples required by [`marginal_entropy_estimate`].
pub const MIN_KDE_SAMPLES: usize = 64;
/// Bootstrap resamples used by [`marginal_entropy_estimate`].
pub const BOOTSTRAP_RESAMPLES: usize = 200;
const Z95: f64 = 1.959_963_984_540_054;
const Z95_ONE_SIDED: f64 = 1.644_853_626_951_472;

/// `‖V * (μ − ρ)‖²_{L²}`.
pub fn mollified_l2(mu: &EmpiricalMeasure, rho: &GridFunction, v: &GridFunction) -> Result<f64> {
    let diff = empirical_convolution(mu, v)?.sub(&v.convolve(rho)?)?;
    diff.inner(&diff)
}

/// `(1/σ²) ⟨Ŵ * (μ − ρ), V * (μ − ρ)⟩` with `Ŵ(x) = W(−x)`, i.e. the quadratic form of
/// `W * V` against the signed measure `μ − ρ`. The pair's sign is not applied: for `W = V`
/// even this is a squared norm.
pub fn modulated_energy(mu: &EmpiricalMeasure, rho: &GridFunction, pair: &KernelPair, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(invalid("the modulated energy needs sigma > 0"));
    }
    let v = pair.v();
    let w_hat = pair.w().reflect();
    let a = empirical_convolution(mu, &w_hat)?.sub(&w_hat.convolve(rho)?)?;
    let b = empirical_convolution(mu, v)?.sub(&v.convolve(rho)?)?;
    Ok(a.inner(&b)? / (sigma * sigma))
}

/// `max_i |(1/N) Σ_j k(Y^i − Y^j) − field(Y^i)|` with `field = k * ρ`.
pub fn lln_defect(y: &[f64], table: &KernelTable, field: &GridFunction) -> f64 {
    let sums = pair_drift(y, table);
    y.iter()
        .zip(&sums)
        .fold(0.0, |m, (&yi, s)| m.max((s - field.evaluate_at(&[yi])).abs()))
}

/// The exact `t = 0` value of `E‖V * (μ₀ − ρ₀)‖²` for i.i.d. initial particles:
/// `(1/N)(∫ V² * ρ₀ − ∫ (V * ρ₀)²)`.
pub fn initial_value_identity(rho0: &GridFunction, v: &GridFunction, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("N must be positive"));
    }
    let v2 = v.mul(v)?.convolve(rho0)?.quadrature();
    let vr = v.convolve(rho0)?;
    Ok((v2 - vr.inner(&vr)?) / n as f64)
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Estimate {
    pub fn of(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = compensated_sum(samples.iter().copied()) / n as f64;
        let stderr = if n > 1 {
            let ss = compensated_sum(samples.iter().map(|x| (x - mean) * (x - mean)));
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, stderr, count: n }
    }

    fn require(samples: &[f64], what: &'static str) -> Result<Self> {
        if samples.len() < MIN_REPLICAS {
            return Err(Error::TooFewSamples {
                what,
                required: MIN_REPLICAS,
                got: samples.len(),
            });
        }
        Ok(Self::of(samples))
    }
}

/// Trapezoid rule over possibly uneven save times.
pub fn trapezoid(t: &[f64], f: &[f64]) -> f64 {
    compensated_sum(t.windows(2).zip(f.windows(2)).map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1])))
}

/// `(‖W‖²_{L²}/σ²) E ∫₀ᵗ ‖V * (μ_s − ρ_s)‖² ds` from per-replica series sampled at `times`.
pub fn entropy_bound_rhs(times: &[f64], series: &[Vec<f64>], w_norm_l2: f64, sigma: f64) -> Result<Estimate> {
    if !(sigma > 0.0) {
        return Err(invalid("the entropy bound needs sigma > 0"));
    }
    if series.iter().any(|s| s.len() != times.len()) {
        return Err(invalid("every replica series must match the save times"));
    }
    let c = w_norm_l2 * w_norm_l2 / (sigma * sigma);
    let per: Vec<f64> = series.iter().map(|s| c * trapezoid(times, s)).collect();
    Estimate::require(&per, "entropy_bound_rhs replicas")
}

/// An event frequency with its 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proportion {
    pub hits: usize,
    pub total: usize,
    pub frequency: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Proportion {
    pub fn new(hits: usize, total: usize) -> Self {
        let n = total as f64;
        let p = hits as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        Self {
            hits,
            total,
            frequency: p,
            lo: (centre - half).max(0.0),
            hi: (centre + half).min(1.0),
        }
    }

    /// One-sided two-proportion z-test at 95% for `later > self`.
    pub fn significantly_below(&self, later: &Proportion) -> bool {
        let (n1, n2) = (self.total as f64, later.total as f64);
        let pooled = (self.hits + later.hits) as f64 / (n1 + n2);
        let se = (pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)).sqrt();
        if se == 0.0 {
            return later.frequency > self.frequency;
        }
        (later.frequency - self.frequency) / se > Z95_ONE_SIDED
    }
}

/// `P̂(sup_t max_i |X^i − Y^i| ≥ N^{−α})` over replicas.
pub fn coupling_event_frequency(records: &[DiagnosticsRecord], alpha: f64, n: usize) -> Result<Proportion> {
    if records.len() < MIN_REPLICAS {
        return Err(Error::TooFewSamples {
            what: "coupling_event_frequency replicas",
            required: MIN_REPLICAS,
            got: records.len(),
        });
    }
    let threshold = (n as f64).powf(-alpha);
    let hits = records.iter().filter(|r| r.running_max_coupling() >= threshold).count();
    Ok(Proportion::new(hits, records.len()))
}

/// Fraction of (replica, save time) pairs with LLN defect above `N^{−(α+δ)}`.
pub fn lln_event_frequency(records: &[DiagnosticsRecord], alpha: f64, delta: f64, n: usize) -> Result<Proportion> {
    let s = alpha + delta;
    if !(s > 0.0 && s < 0.5) {
        return Err(invalid(format!("alpha + delta must lie in (0, 1/2), got {s}")));
    }
    let threshold = (n as f64).powf(-s);
    let defects = records.iter().flat_map(|r| r.rows.iter().map(|row| row.lln_defect));
    let (mut hits, mut total) = (0, 0);
    for d in defects {
        total += 1;
        hits += (d > threshold) as usize;
    }
    if total == 0 {
        return Err(invalid("no save times recorded"));
    }
    Ok(Proportion::new(hits, total))
}

/// Point estimate with a bootstrap standard error and percentile interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapEstimate {
    pub value: f64,
    pub stderr: f64,
    pub lo: f64,
    pub hi: f64,
}

fn smoothed_entropy(samples: &[f64], target: &GridFunction, v: &GridFunction, v_mass: f64) -> Result<f64> {
    let mu = EmpiricalMeasure::new(samples.to_vec(), 1)?;
    let kde = empirical_convolution(&mu, v)?.scale(1.0 / v_mass)?;
    relative_entropy(&kde, target)
}

/// `H(V * μ̂ | V * ρ)` where `μ̂` pools one first-particle sample per replica; both sides are
/// normalized by `∫ V`. Uncertainty by a seeded bootstrap over the samples.
pub fn marginal_entropy_estimate(samples: &[f64], rho: &GridFunction, v: &GridFunction, seed: u64) -> Result<BootstrapEstimate> {
    if samples.len() < MIN_KDE_SAMPLES {
        return Err(Error::TooFewSamples {
            what: "marginal_entropy_estimate samples",
            required: MIN_KDE_SAMPLES,
            got: samples.len(),
        });
    }
    let v_mass = v.quadrature();
    if !(v_mass > 0.0) {
        return Err(invalid("the smoothing kernel must have positive mass"));
    }
    let target = v.convolve(rho)?.scale(1.0 / v_mass)?;
    let value = smoothed_entropy(samples, &target, v, v_mass)?;
    let m = samples.len();
    let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut resample = vec![0.0; m];
    for b in 0..BOOTSTRAP_RESAMPLES {
        let mut s = Stream::new(seed, 0, Domain::Bootstrap, b as u64);
        for r in resample.iter_mut() {
            let k = ((s.uniform() * m as f64).ceil() as usize).clamp(1, m) - 1;
            *r = samples[k];
        }
        boot.push(smoothed_entropy(&resample, &target, v, v_mass)?);
    }
    let mean = compensated_sum(boot.iter().copied()) / boot.len() as f64;
    let sd = (compensated_sum(boot.iter().map(|b| (b - mean) * (b - mean))) / (boot.len() - 1) as f64).sqrt();
    boot.sort_by(f64::total_cmp);
    let q = |p: f64| boot[((p * (BOOTSTRAP_RESAMPLES - 1) as f64).round()) as usize];
    Ok(BootstrapEstimate {
        value,
        stderr: sd,
        lo: q(0.025),
        hi: q(0.975),
    })
}

/// Log-log least-squares fit of `value ≈ C N^{slope}` with a 95% interval on the slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl RateFit {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_hi - self.ci_lo)
    }
}

pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 4 {
        return Err(Error::TooFewSamples {
            what: "rate_fit points",
            required: 4,
            got: points.len(),
        });
    }
    if let Some(&(n, v)) = points.iter().find(|&&(n, v)| !(n > 0.0 && v > 0.0)) {
        return Err(invalid(format!("rate fits need positive N and values, got ({n}, {v})")));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let fit = fit_line(&x, &y);
    let t = StudentsT::new(0.0, 1.0, (points.len() - 2) as f64)
        .map_err(|e| invalid(e.to_string()))?
        .inverse_cdf(0.975);
    let half = t * fit.slope_stderr;
    Ok(RateFit {
        slope: fit.slope,
        intercept: fit.intercept,
        residual: fit.residual,
        ci_lo: fit.slope - half,
        ci_hi: fit.slope + half,
    })
}

/// Net exponents in `N` of the four error terms of the L² estimate with `ε = N^{−β}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub terms: Vec<(&'static str, f64)>,
    pub binding: f64,
}

pub fn predicted_rate_table(pair: &KernelPair, alpha: f64, beta: f64, gamma: f64) -> RateTable {
    predicted_rate_table_for(pair.a_w(), pair.a_v(), alpha, beta, gamma)
}

pub fn predicted_rate_table_for(a_w: f64, a_v: f64, alpha: f64, beta: f64, gamma: f64) -> RateTable {
    let full = beta * (2.0 * a_w + 4.0 * a_v);
    let cross = beta * (a_w + 3.0 * a_v);
    let terms = vec![
        ("N^-1", -1.0 + full),
        ("N^-2alpha", -2.0 * alpha + full),
        ("N^-(alpha+1/2)", -(alpha + 0.5) + cross),
        ("N^-gamma", -gamma + full),
    ];
    let binding = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    RateTable { terms, binding }
}

/// The four decay rates of the mollifier case parameterized by the mollifier exponent `a_k`.
pub fn mollifier_case_rates(a_k: f64, alpha: f64, beta: f64, gamma: f64) -> [f64; 4] {
    [
        2.0 * alpha - beta - (2.0 * a_k + 2.0) * beta,
        alpha + 0.5 - 3.0 * beta - (a_k + 1.0) * beta,
        2.0 * alpha - 3.0 * beta - a_k * beta,
        gamma - (3.0 + 2.0 * a_k) * beta,
    ]
}

/// One-sided Mann–Kendall test for a decreasing trend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendTest {
    pub s: i64,
    pub z: f64,
    pub p_value: f64,
    pub decreasing: bool,
}

pub fn mann_kendall_decreasing(values: &[f64]) -> Result<TrendTest> {
    let n = values.len();
    if n < 3 {
        return Err(Error::TooFewSamples {
            what: "Mann-Kendall values",
            required: 3,
            got: n,
        });
    }
    let mut s = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            s += match values[j].partial_cmp(&values[i]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    let mut ties: BTreeMap<u64, usize> = BTreeMap::new();
    for v in values {
        *ties.entry(v.to_bits()).or_default() += 1;
    }
    let tie_term: f64 = ties
        .values()
        .filter(|&&c| c > 1)
        .map(|&c| (c * (c - 1) * (2 * c + 5)) as f64)
        .sum();
    let nf = n as f64;
    let var = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - tie_term) / 18.0;
    let z = if s > 0 {
        (s as f64 - 1.0) / var.sqrt()
    } else if s < 0 {
        (s as f64 + 1.0) / var.sqrt()
    } else {
        0.0
    };
    let p_value = Normal::new(0.0, 1.0).map_err(|e| invalid(e.to_string()))?.cdf(z);
    Ok(TrendTest {
        s,
        z,
        p_value,
        decreasing: p_value < 0.05,
    })
}

/// Diagnostics of one replica at one save time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaveRow {
    pub t: f64,
    pub l2_moll: f64,
    pub l2_moll_dx: f64,
    pub modulated_energy: f64,
    /// Running maximum of `max_i |X^i − Y^i|` up to `t`.
    pub coupling_max: f64,
    pub lln_defect: f64,
}

/// All save-time diagnostics of one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub replica: u64,
    pub n_particles: usize,
    pub rows: Vec<SaveRow>,
    /// First particle's interacting position at the final time.
    pub x1_final: f64,
    pub boundary_hits: u64,
}

impl DiagnosticsRecord {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn running_max_coupling(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.coupling_max))
    }

    pub fn sup_l2_moll(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.l2_moll))
    }

    pub fn integrated_l2_moll_dx(&self) -> f64 {
        let f: Vec<f64> = self.rows.iter().map(|r| r.l2_moll_dx).collect();
        trapezoid(&self.times(), &f)
    }

    pub fn sup_abs_modulated_energy(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.modulated_energy.abs()))
    }

    /// The series entering the entropy bound: `V * (μ − ρ)` for product pairs, `V_x * (μ − ρ)`
    /// for gradient pairs.
    pub fn entropy_series(&self, mode: PairMode) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| match mode {
                PairMode::Product => r.l2_moll,
                PairMode::GradientProduct => r.l2_moll_dx,
            })
            .collect()
    }
}

pub const RECORD_HEADER: &str = "N,replica,t,l2_moll,l2_moll_dx,modulated_energy,coupling_max,lln_defect";

/// Rows `N,replica,t,...` in replica order.
pub fn write_records<W: Write>(mut w: W, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut sorted: Vec<&DiagnosticsRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.n_particles, r.replica));
    for r in sorted {
        for row in &r.rows {
            writeln!(
                w,
                "{},{},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.n_particles, r.replica, row.t, row.l2_moll, row.l2_moll_dx, row.modulated_energy, row.coupling_max, row.lln_defect
            )?;
        }
    }
    Ok(())
}

/// Parameters that turn records into summary rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepContext {
    pub alpha: f64,
    pub delta: f64,
    pub sigma: f64,
    pub mode: PairMode,
}

/// One `(N, quantity)` summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub quantity: &'static str,
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

pub const SUP_L2: &str = "sup_l2_moll";
pub const INT_L2_DX: &str = "int_l2_moll_dx";
pub const SUP_MODULATED: &str = "sup_abs_modulated_energy";
pub const COUPLING_FREQ: &str = "coupling_event_frequency";
pub const LLN_FREQ: &str = "lln_complement_frequency";
pub const ENTROPY_BOUND: &str = "entropy_bound";

/// Per-`N` Monte Carlo summaries. Records are sorted by replica before reduction, so the
/// result does not depend on the order in which replicas finished.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn add(&mut self, n: usize, records: &[DiagnosticsRecord], w_norm_l2: f64, ctx: &SweepContext) -> Result<()> {
        let mut recs: Vec<DiagnosticsRecord> = records.to_vec();
        recs.sort_by_key(|r| r.replica);
        let collect = |f: &dyn Fn(&DiagnosticsRecord) -> f64| recs.iter().map(f).collect::<Vec<f64>>();
        let mut push = |quantity, e: Estimate| {
            self.rows.push(SweepRow {
                n,
                quantity,
                mean: e.mean,
                stderr: e.stderr,
                count: e.count,
            })
        };
        push(SUP_L2, Estimate::require(&collect(&|r| r.sup_l2_moll()), "replicas")?);
        push(INT_L2_DX, Estimate::require(&collect(&|r| r.integrated_l2_moll_dx()), "replicas")?);
        push(SUP_MODULATED, Estimate::require(&collect(&|r| r.sup_abs_modulated_energy()), "replicas")?);
        let freq = |p: Proportion| Estimate {
            mean: p.frequency,
            stderr: (p.frequency * (1.0 - p.frequency) / p.total as f64).sqrt(),
            count: p.total,
        };
        push(COUPLING_FREQ, freq(coupling_event_frequency(&recs, ctx.alpha, n)?));
        push(LLN_FREQ, freq(lln_event_frequency(&recs, ctx.alpha, ctx.delta, n)?));
        if ctx.sigma > 0.0 {
            let times = recs[0].times();
            let series: Vec<Vec<f64>> = recs.iter().map(|r| r.entropy_series(ctx.mode)).collect();
            push(ENTROPY_BOUND, entropy_bound_rhs(&times, &series, w_norm_l2, ctx.sigma)?);
        }
        Ok(())
    }

    /// `(N, mean)` points of one quantity in increasing `N`.
    pub fn series(&self, quantity: &str) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.quantity == quantity)
            .map(|r| (r.n as f64, r.mean))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts
    }

    pub fn row(&self, n: usize, quantity: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.n == n && r.quantity == quantity)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "N,quantity,mean,stderr,count")?;
        for r in &self.rows {
            writeln!(w, "{},{},{:e},{:e},{}", r.n, r.quantity, r.mean, r.stderr, r.count)?;
        }
        Ok(())
    }

    /// Rate fits of the quantities that should decay in `N`.
    pub fn rates(&self, predicted_binding: f64) -> Vec<RateRow> {
        [SUP_L2, INT_L2_DX, SUP_MODULATED, ENTROPY_BOUND]
            .into_iter()
            .filter_map(|q| {
                let pts = self.series(q);
                match rate_fit(&pts) {
                    Ok(fit) => Some(RateRow {
                        quantity: q,
                        fit,
                        predicted_binding,
                    }),
                    Err(e) => {
                        log::info!("no rate for {q}: {e}");
                        None
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub quantity: &'static str,
    pub fit: RateFit,
    pub predicted_binding: f64,
}

pub fn write_rates<W: Write>(mut w: W, rows: &[RateRow]) -> Result<()> {
    writeln!(w, "quantity,slope,ci_lo,ci_hi,predicted_binding_exponent")?;
    for r in rows {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e}",
            r.quantity, r.fit.slope, r.fit.ci_lo, r.fit.ci_hi, r.predicted_binding
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
