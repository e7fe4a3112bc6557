use super::*;

fn tiny() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.schedule.n_list = vec![8, 16, 32, 64];
    c.grid.half_width = 4.0;
    c.grid.n = 128;
    c.sde.t_final = 0.1;
    c.sde.save_intervals = 5;
    c.diagnostics.replicas = 8;
    c
}

fn file<'a>(files: &'a [OutputFile], name: &str) -> &'a str {
    std::str::from_utf8(&files.iter().find(|f| f.name == name).unwrap().bytes).unwrap()
}

#[test]
fn flags_override_file_keys() {
    let cli = Cli::try_parse_from(["chaoslab", "--seed", "42", "--out", "x", "simulate"]).unwrap();
    let c = tiny().with_overrides(&cli);
    assert_eq!(c.seed, 42);
    assert_eq!(c.output_dir, PathBuf::from("x"));
    let cli = Cli::try_parse_from(["chaoslab", "kernel-check", "--threads", "3"]).unwrap();
    assert_eq!(cli.threads, Some(3));
    assert_eq!(cli.command, Command::KernelCheck);
}

#[test]
fn single_replica_smoke_run_emits_headers() {
    let mut c = tiny();
    c.schedule.n_list = vec![8];
    c.diagnostics.replicas = 1;
    let files = execute(Command::Simulate, &c).unwrap();
    let names: Vec<&str> = files.iter().map(|f| f.name).collect();
    assert_eq!(names, ["records.csv", "sweep.csv", "config.toml"]);
    let head = format!("# chaoslab {VERSION} config={}", c.hash());
    for f in &files {
        assert!(std::str::from_utf8(&f.bytes).unwrap().starts_with(&head));
    }
    let records = file(&files, "records.csv");
    assert_eq!(records.lines().nth(1), Some(RECORD_HEADER));
    assert_eq!(records.lines().count(), 2 + 6);
    assert_eq!(file(&files, "sweep.csv").lines().count(), 2);
}

#[test]
fn sweep_is_deterministic_and_seed_sensitive() {
    let c = tiny();
    let a = execute(Command::Simulate, &c).unwrap();
    let b = execute(Command::Simulate, &c).unwrap();
    assert_eq!(a, b);
    let mut d = c.clone();
    d.seed += 1;
    let other = execute(Command::Simulate, &d).unwrap();
    assert_ne!(file(&a, "records.csv"), file(&other, "records.csv"));
}

#[test]
fn rate_sweep_adds_rate_tables() {
    let files = execute(Command::RateSweep, &tiny()).unwrap();
    let rates = file(&files, "rates.csv");
    assert!(rates.lines().nth(2).unwrap().starts_with("sup_l2_moll,"));
    let predicted = file(&files, "predicted_rates.csv");
    assert_eq!(predicted.lines().filter(|l| l.ends_with(",true")).count(), 1);
    assert!(file(&files, "trends.csv").contains("coupling_event_frequency"));
}

#[test]
fn validation_precedes_computation() {
    let mut c = tiny();
    c.diagnostics.delta = 0.3;
    let e = execute(Command::Simulate, &c).unwrap_err();
    assert_eq!(exit_code(e.class()), 2);
    let json: serde_json::Value = serde_json::from_str(&error_json(&e)).unwrap();
    assert_eq!(json["class"], "validation");
    assert_eq!(json["error"], "invalid_parameter");
}

#[test]
fn exit_codes() {
    assert_eq!(exit_code(Error::Cfl { dt: 1.0, admissible_dt: 0.5 }.class()), 3);
    assert_eq!(exit_code(Error::Io(std::io::Error::other("x")).class()), 4);
    assert_eq!(run(["chaoslab", "--bogus"]), 2);
    assert_eq!(run(["chaoslab", "--help"]), 0);
}

#[test]
fn failed_runs_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[schedule]\nbeta = 0.45\n").unwrap();
    let code = run(["chaoslab", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "simulate"]);
    assert_eq!(code, 2);
    assert!(!out.exists());
}
