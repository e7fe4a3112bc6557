//! A small N-sweep with fitted decay rates and the predicted exponent table.

use chaoslab::cli::run_sweep;
use chaoslab::config::ExperimentConfig;
use chaoslab::diagnostics::{predicted_rate_table_for, write_rates};

fn main() -> chaoslab::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.schedule.n_list = vec![32, 64, 128, 256, 512];
    cfg.diagnostics.replicas = 32;
    cfg.validate_sweep()?;
    let out = run_sweep(&cfg)?;
    out.report.write_csv(std::io::stdout().lock())?;
    println!();
    write_rates(std::io::stdout().lock(), &out.report.rates(out.predicted_binding))?;
    let table = predicted_rate_table_for(0.0, 2.5, cfg.diagnostics.alpha, cfg.schedule.beta, cfg.diagnostics.gamma);
    println!();
    for (term, e) in &table.terms {
        println!("{term}: {e:.3}");
    }
    println!("binding: {:.3}", table.binding);
    Ok(())
}
