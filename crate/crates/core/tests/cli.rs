use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use measerr::adjust::{AcceptanceRates, ChainDraws, McmcConfig, ModelKind, PosteriorSamples, TauEPrior};
use measerr::harness::report::Cell;
use measerr::harness::{summarize_samples, ReplicationTable};
use measerr::naive::FitResult;

fn measerr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_measerr")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).skip(1).map(String::from).collect()
}

fn header(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let line = text.lines().find(|l| !l.starts_with('#')).unwrap();
    line.split(',').map(String::from).collect()
}

const QUICK_MCMC: [&str; 6] = ["--burn-in", "200", "--keep", "800", "--thin", "4"];

#[test]
fn simulate_then_naive_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let cohort = dir.path().join("c.csv");
    let sim = measerr(&["simulate", "--n", "2000", "--seed", "5", "--output", cohort.to_str().unwrap()]);
    assert_eq!(code(&sim), 0, "{}", String::from_utf8_lossy(&sim.stderr));
    assert_eq!(data_lines(&cohort).len(), 2000);

    let naive = measerr(&[
        "naive",
        "--cohort",
        cohort.to_str().unwrap(),
        "--kind",
        "logistic",
        "--out-dir",
        out_dir,
        "--format",
        "csv",
    ]);
    assert_eq!(code(&naive), 0, "{}", String::from_utf8_lossy(&naive.stderr));
    let table = dir.path().join("naive_logistic.csv");
    assert!(header(&table).contains(&"odds_ratio".to_string()));
    assert_eq!(data_lines(&table).len(), 1);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    fs::write(&config, r#"{"cohort": {"n": 123, "seed": 9}}"#).unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let from_file = measerr(&["simulate", "--config", config.to_str().unwrap(), "--output", a.to_str().unwrap()]);
    assert_eq!(code(&from_file), 0);
    assert_eq!(data_lines(&a).len(), 123);
    let overridden =
        measerr(&["simulate", "--config", config.to_str().unwrap(), "--n", "50", "--output", b.to_str().unwrap()]);
    assert_eq!(code(&overridden), 0);
    assert_eq!(data_lines(&b).len(), 50);
    assert_eq!(data_lines(&a)[..50], data_lines(&b)[..]);
}

#[test]
fn invalid_input_exits_with_the_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let bad_prevalence = measerr(&["simulate", "--pi", "1.5", "--output", out.to_str().unwrap()]);
    assert_eq!(code(&bad_prevalence), 2);
    assert!(String::from_utf8_lossy(&bad_prevalence.stderr).contains("pi"));
    assert!(!out.exists());

    let missing = measerr(&["naive", "--cohort", dir.path().join("nope.csv").to_str().unwrap()]);
    assert_eq!(code(&missing), 2);

    let bad_prior = measerr(&["adjust", "--cohort", "x.csv", "--prior", "typeZ"]);
    assert_eq!(code(&bad_prior), 2);

    let bad_config = dir.path().join("bad.json");
    fs::write(&bad_config, "{\n  \"cohort\": {\"n\": \"many\"}\n}").unwrap();
    let parse = measerr(&["simulate", "--config", bad_config.to_str().unwrap()]);
    assert_eq!(code(&parse), 2);
    assert!(String::from_utf8_lossy(&parse.stderr).contains("bad.json:2"));
}

#[test]
fn single_variant_replication_gives_one_row_in_every_format() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "replicate",
        "--n",
        "300",
        "--priors",
        "typeA",
        "--kinds",
        "linear",
        "--format",
        "csv,markdown",
        "--out-dir",
    ];
    args.push(dir.path().to_str().unwrap());
    args.extend(QUICK_MCMC);
    let out = measerr(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let csv = data_lines(&dir.path().join("table2_linear.csv"));
    assert_eq!(csv.len(), 1);
    let md = fs::read_to_string(dir.path().join("table2_linear.md")).unwrap();
    let md_rows: Vec<&str> = md.lines().filter(|l| l.starts_with("| ")).skip(1).collect();
    assert_eq!(md_rows.len(), 1);
    assert!(!dir.path().join("table3_logistic.csv").exists());

    // Markdown rounds to four significant digits; CSV keeps full precision.
    let md_cells: Vec<&str> = md_rows[0].trim_matches('|').split('|').map(str::trim).collect();
    let csv_cells: Vec<&str> = csv[0].split(',').collect();
    assert_eq!(md_cells.len(), csv_cells.len());
    for (m, c) in md_cells.iter().zip(&csv_cells) {
        match (m.parse::<f64>(), c.parse::<f64>()) {
            (Ok(m), Ok(c)) => assert!((m - c).abs() <= 5e-4 * c.abs().max(1e-12), "{m} vs {c}"),
            _ => assert_eq!(m, c),
        }
    }
}

#[test]
fn adjust_is_deterministic_and_writes_rhat() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = dir.path().join("c.csv");
    assert_eq!(code(&measerr(&["simulate", "--n", "300", "--output", cohort.to_str().unwrap()])), 0);
    let mut summaries = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let mut args = vec!["adjust", "--cohort", cohort.to_str().unwrap(), "--prior", "typeB", "--format", "csv"];
        args.extend(["--out-dir", out_dir.to_str().unwrap()]);
        args.extend(QUICK_MCMC);
        let out = measerr(&args);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out_dir.join("adjust_linear_typeB_rhat.csv").exists());
        summaries.push(fs::read(out_dir.join("adjust_linear_typeB_summary.csv")).unwrap());
    }
    assert_eq!(summaries[0], summaries[1]);
}

#[test]
fn evidence_writes_one_row_per_setting() {
    let dir = tempfile::tempdir().unwrap();
    let out = measerr(&[
        "evidence",
        "--n-values",
        "10,100",
        "--p-null-values",
        "0.5,0.01",
        "--format",
        "csv",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(data_lines(&dir.path().join("evidence.csv")).len(), 4);
}

/// Two chains stuck in different places must fail the gate, and the table
/// row must then carry no summaries.
#[test]
fn disagreeing_chains_fail_the_gate_and_are_withheld() {
    let params = ModelKind::Linear.parameter_names();
    let chain = |offset: f64| ChainDraws {
        columns: params.iter().map(|_| (0..200).map(|i| offset + 1.0 + (i % 7) as f64 * 0.01).collect()).collect(),
        acceptance: AcceptanceRates::default(),
    };
    let samples = PosteriorSamples {
        kind: ModelKind::Linear,
        parameters: params.iter().map(|s| s.to_string()).collect(),
        chains: vec![chain(0.0), chain(5.0)],
        config: McmcConfig::default(),
    };
    let cell = summarize_samples(&samples, TauEPrior::TypeA).unwrap();
    assert!(!cell.gate_passed);
    let table = ReplicationTable {
        kind: ModelKind::Linear,
        naive: FitResult {
            intercept: 0.0,
            slope: 0.0,
            slope_se: 1.0,
            ci95_lo: -1.96,
            ci95_hi: 1.96,
            converged: true,
            iterations: 1,
        },
        cells: vec![cell],
    }
    .to_table();
    let status = table.columns.iter().position(|c| c == "status").unwrap();
    let mean = table.columns.iter().position(|c| c == "mean").unwrap();
    let row = &table.rows[0];
    assert_eq!(row[status], Cell::Text("unconverged".into()));
    assert_eq!(row[mean], Cell::Empty);
}
