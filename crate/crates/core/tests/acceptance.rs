//! Acceptance criteria, one verdict line each. Runs as a plain binary so the
//! verdicts are printed by `cargo test` without extra flags. Failing
//! criteria are reported but only turn the exit status non-zero when
//! `ACCEPTANCE_STRICT` is set.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::geweke::{geweke, ROUNDS};
use common::state;
use measerr::adjust::{
    full_conditional_coeffs_linear, full_conditional_precision, run_chains, DataView, ExposureScale, McmcConfig,
    ModelKind, ModelSpec, NormalPrior, Outcome, PriorSet, SpreadReading, TauEPrior,
};
use measerr::cohort::{simulate_cohort, Cohort, CohortConfig};
use measerr::evidence::{delta, marginal_likelihood_null, marginal_likelihood_positive, HypothesisPriors, ToyData};
use measerr::harness::{
    adjust_cohort, cmd_replicate, replicate_cohort, summarize_samples, ExperimentConfig, ReplicationTable, ReportFormat,
};
use measerr::naive::{fit_linear, fit_logistic, logistic_loglik};
use measerr::rng::{GammaParams, Rng};

const NAIVE_LINEAR_BUDGET: Duration = Duration::from_secs(5);
const NAIVE_LOGISTIC_BUDGET: Duration = Duration::from_secs(30);
const TABLE2_BUDGET: Duration = Duration::from_secs(10 * 60);
const TABLE3_BUDGET: Duration = Duration::from_secs(20 * 60);
const DESK_N: usize = 2000;

struct Verdict {
    id: &'static str,
    title: &'static str,
    pass: bool,
    details: Vec<String>,
}

impl Verdict {
    fn print(&self) {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {}: {}", self.id, self.title);
        for d in &self.details {
            println!("         {d}");
        }
    }
}

/// Accumulates sub-checks; a criterion passes when all of them do.
struct Checks {
    pass: bool,
    details: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Checks { pass: true, details: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.pass &= ok;
        self.details.push(format!("{} {what}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, what: String) {
        self.details.push(format!("note {what}"));
    }

    fn verdict(self, id: &'static str, title: &'static str) -> Verdict {
        Verdict { id, title, pass: self.pass, details: self.details }
    }
}

fn null_cohort() -> (Cohort, Duration) {
    let t = Instant::now();
    let cohort = simulate_cohort(&CohortConfig::default()).expect("default cohort");
    (cohort, t.elapsed())
}

fn criterion_1(cohort: &Cohort, sim_time: Duration) -> Verdict {
    let mut c = Checks::new();
    let t = Instant::now();
    let fit = fit_linear(&cohort.w(), &cohort.y());
    let elapsed = t.elapsed() + sim_time;
    match fit {
        Ok(fit) => {
            c.note(format!(
                "n = {}, slope {:.5}, 95% CI [{:.5}, {:.5}]",
                cohort.records.len(),
                fit.slope,
                fit.ci95_lo,
                fit.ci95_hi
            ));
            c.check(fit.ci_contains(0.0), "CI contains 0".into());
            c.check(fit.slope.abs() < 0.005, format!("|slope| = {:.5} < 0.005", fit.slope.abs()));
        }
        Err(e) => c.check(false, format!("fit failed: {e}")),
    }
    c.check(elapsed < NAIVE_LINEAR_BUDGET, format!("runtime {:.2?} < 5 s (simulation included)", elapsed));
    c.verdict("1", "naive linear fit on the null cohort")
}

fn criterion_2(cohort: &Cohort) -> Verdict {
    let mut c = Checks::new();
    let t = Instant::now();
    let fit = fit_logistic(&cohort.w(), &cohort.z());
    let elapsed = t.elapsed();
    match fit {
        Ok(fit) => {
            let (or, lo, hi) = fit.odds_ratio();
            c.note(format!("OR {or:.4}, 95% CI [{lo:.4}, {hi:.4}], {} IRLS iterations", fit.iterations));
            c.check(lo <= 1.0 && 1.0 <= hi, "OR CI contains 1".into());
            c.check(fit.slope.abs() < 0.02, format!("|log OR| = {:.5} < 0.02", fit.slope.abs()));
        }
        Err(e) => c.check(false, format!("fit failed: {e}")),
    }
    c.check(elapsed < NAIVE_LOGISTIC_BUDGET, format!("runtime {:.2?} < 30 s", elapsed));
    c.verdict("2", "naive logistic fit on the null cohort")
}

fn desk_config(kind: ModelKind) -> ExperimentConfig {
    ExperimentConfig {
        cohort: CohortConfig { n: DESK_N, ..CohortConfig::default() },
        model_kinds: vec![kind],
        ..ExperimentConfig::default()
    }
}

fn run_table(kind: ModelKind) -> (Result<ReplicationTable, String>, Duration, ExperimentConfig) {
    let cfg = desk_config(kind);
    let t = Instant::now();
    let result = simulate_cohort(&cfg.cohort)
        .and_then(|cohort| replicate_cohort(&cohort, &cfg))
        .map(|mut tables| tables.remove(0))
        .map_err(|e| e.to_string());
    (result, t.elapsed(), cfg)
}

fn protocol_note(c: &mut Checks, cfg: &ExperimentConfig) {
    let m = &cfg.mcmc;
    c.note(format!(
        "n = {}, {} chains, burn-in {}, {} kept every {} ({} retained per chain)",
        cfg.cohort.n,
        m.n_chains,
        m.burn_in,
        m.keep,
        m.thin,
        m.retained_per_chain()
    ));
}

fn criterion_3() -> Verdict {
    let mut c = Checks::new();
    let (table, elapsed, cfg) = run_table(ModelKind::Linear);
    protocol_note(&mut c, &cfg);
    match table {
        Ok(table) => {
            let mut widths = std::collections::HashMap::new();
            for cell in &table.cells {
                let s = cell.association();
                let rhat = cell.rhat_of("beta").unwrap_or(f64::NAN);
                c.check(rhat < 1.1, format!("{:<28} rhat(beta) = {rhat:.4} < 1.1", cell.prior.label()));
                c.check(
                    s.contains(0.0),
                    format!(
                        "{:<28} beta mean {:.4}, CrI [{:.4}, {:.4}] contains 0",
                        cell.prior.label(),
                        s.mean,
                        s.p2_5,
                        s.p97_5
                    ),
                );
                widths.insert(cell.prior, s.width());
            }
            match (widths.get(&TauEPrior::TypeA), widths.get(&TauEPrior::TypeB)) {
                (Some(a), Some(b)) => {
                    c.check(*b >= 2.0 * a, format!("CrI width type B {b:.4} >= 2 x type A {a:.4} (ratio {:.3})", b / a))
                }
                _ => c.check(false, "type A and type B rows present".into()),
            }
        }
        Err(e) => c.check(false, format!("replication failed: {e}")),
    }
    c.check(elapsed < TABLE2_BUDGET, format!("runtime {elapsed:.2?} < 10 min"));
    c.verdict("3", "posterior of beta under the four tau_e priors, linear model")
}

fn criterion_4() -> Verdict {
    let mut c = Checks::new();
    let (table, elapsed, cfg) = run_table(ModelKind::Logistic);
    protocol_note(&mut c, &cfg);
    match table {
        Ok(table) => {
            for cell in &table.cells {
                let s = cell.association();
                let rhat = cell.rhat_of("alpha").unwrap_or(f64::NAN);
                c.check(
                    cell.gate_passed && s.contains(1.0),
                    format!(
                        "{:<28} exp(alpha) mean {:.4}, CrI [{:.4}, {:.4}] contains 1 (rhat {rhat:.4})",
                        cell.prior.label(),
                        s.mean,
                        s.p2_5,
                        s.p97_5
                    ),
                );
            }
        }
        Err(e) => c.check(false, format!("replication failed: {e}")),
    }
    c.check(elapsed < TABLE3_BUDGET, format!("runtime {elapsed:.2?} < 20 min"));
    c.verdict("4", "posterior odds ratio under the four tau_e priors, logistic model")
}

fn criterion_5() -> Verdict {
    let mut c = Checks::new();
    let cfg = ExperimentConfig {
        cohort: CohortConfig { n: DESK_N, beta_true: 0.5, ..CohortConfig::default() },
        exposure_scale: ExposureScale::Log,
        ..ExperimentConfig::default()
    };
    let cohort = match simulate_cohort(&cfg.cohort) {
        Ok(c) => c,
        Err(e) => {
            c.check(false, format!("simulation failed: {e}"));
            return c.verdict("5", "signal recovery on log X");
        }
    };
    match fit_linear(&cohort.log_w(), &cohort.y()) {
        Ok(fit) => c.check(
            (fit.slope / 0.25 - 1.0).abs() <= 0.10,
            format!("naive slope on log W {:.4} within 10% of 0.25", fit.slope),
        ),
        Err(e) => c.check(false, format!("naive fit failed: {e}")),
    }
    let prior = TauEPrior::TypeA;
    match adjust_cohort(&cohort, ModelKind::Linear, prior, &cfg) {
        Ok((cell, _)) => {
            let s = cell.association();
            c.note(format!(
                "{} prior: beta mean {:.4}, CrI [{:.4}, {:.4}], rhat {:.4}",
                prior.label(),
                s.mean,
                s.p2_5,
                s.p97_5,
                cell.rhat_of("beta").unwrap_or(f64::NAN)
            ));
            c.check(s.contains(0.5), "adjusted CrI contains 0.5".into());
            c.check(
                (s.mean / 0.5 - 1.0).abs() <= 0.20,
                format!("adjusted posterior mean {:.4} within 20% of 0.5", s.mean),
            );
        }
        Err(e) => c.check(false, format!("adjustment failed: {e}")),
    }

    // Reference run with the error precision known, where the slope is
    // identified from (W, Y) alone.
    let mut spec = ModelSpec::from_cohort(
        &cohort,
        ModelKind::Linear,
        PriorSet::for_kind(ModelKind::Linear, prior, cfg.mu_x_prior_reading),
        ExposureScale::Log,
    );
    spec.clamp.tau_e = Some(cfg.cohort.tau_e);
    if let Ok(cell) = run_chains(&spec, &cfg.mcmc).and_then(|s| summarize_samples(&s, prior)) {
        let s = cell.association();
        c.note(format!(
            "diagnostic, tau_e fixed at its true value: beta mean {:.4}, CrI [{:.4}, {:.4}]",
            s.mean, s.p2_5, s.p97_5
        ));
    }
    c.verdict("5", "signal recovery on log X (beta = 0.5)")
}

/// Independent solve of the 2x2 normal equations by Cramer's rule.
fn normal_equations(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * sxx - sx * sx;
    ((sy * sxx - sx * sxy) / det, (n * sxy - sx * sy) / det)
}

fn criterion_6() -> Verdict {
    let mut c = Checks::new();

    // Normal-normal: x = 1, y = 1, tau_eps = 1, N(0, 100) priors.
    let mut priors = PriorSet::linear(TauEPrior::Uninformative, SpreadReading::Variance);
    priors.intercept = NormalPrior::new(0.0, 100.0);
    priors.slope = NormalPrior::new(0.0, 100.0);
    let spec = ModelSpec::new(
        DataView { log_w: vec![1.0], outcome: Outcome::Continuous(vec![1.0]) },
        priors,
        ExposureScale::Log,
    );
    let cond = full_conditional_coeffs_linear(&state(vec![1.0], 1), &spec);
    let expected = [[1.01, 1.0], [1.0, 1.01]];
    let err = (0..2)
        .flat_map(|r| (0..2).map(move |k| (r, k)))
        .map(|(r, k)| (cond.precision[r][k] - expected[r][k]).abs())
        .chain(cond.mean.iter().map(|m| (m - 1.0 / 2.01).abs()))
        .fold(0.0, f64::max);
    c.check(err < 1e-10, format!("normal-normal conditional vs hand algebra: max error {err:.1e}"));

    let post = full_conditional_precision(&[1.0, 1.0], GammaParams { shape: 1.0, scale: 1.0 });
    let err = (post.shape - 2.0).abs().max((post.scale - 0.5).abs());
    c.check(err < 1e-10, format!("gamma conditional Gamma(1,1) + {{1,1}} -> Gamma(2, 1/2): max error {err:.1e}"));

    for (kind, scale, seed) in [
        (ModelKind::Linear, ExposureScale::Natural, 101),
        (ModelKind::Logistic, ExposureScale::Natural, 202),
        (ModelKind::Linear, ExposureScale::Log, 111),
        (ModelKind::Logistic, ExposureScale::Log, 222),
    ] {
        let checks = geweke(kind, scale, seed, ROUNDS);
        let worst = checks.iter().max_by(|a, b| a.z.abs().total_cmp(&b.z.abs())).expect("checks");
        c.check(
            checks.iter().all(|k| k.z.abs() < 4.0),
            format!(
                "joint-distribution test {kind:?}/{scale:?}, n = 50, {ROUNDS} rounds: max |z| = {:.2} ({})",
                worst.z.abs(),
                worst.name
            ),
        );
    }

    let mut rng = Rng::new(66);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..10).map(|_| 3.0 * rng.std_normal()).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 0.7 * v + rng.std_normal()).collect();
        let fit = fit_linear(&x, &y).expect("random design");
        let (b0, b1) = normal_equations(&x, &y);
        worst = worst.max((fit.intercept - b0).abs()).max((fit.slope - b1).abs());
    }
    c.check(worst < 1e-10, format!("fit_linear vs normal equations, 1000 designs: max error {worst:.1e}"));

    let w: Vec<f64> = (0..20).map(|i| -2.0 + 0.2 * i as f64).collect();
    let z: Vec<u8> = w.iter().map(|&v| u8::from(rng.uniform() < 1.0 / (1.0 + (-(0.3 + 1.2 * v)).exp()))).collect();
    match fit_logistic(&w, &z) {
        Ok(fit) => {
            let best = logistic_loglik(&w, &z, fit.intercept, fit.slope);
            let beaten = (0..201)
                .flat_map(|i| (0..201).map(move |j| (-5.0 + 0.05 * i as f64, -5.0 + 0.05 * j as f64)))
                .filter(|&(b0, b1)| logistic_loglik(&w, &z, b0, b1) > best)
                .count();
            c.check(beaten == 0, format!("fit_logistic vs 201 x 201 likelihood grid: {beaten} grid points higher"));
        }
        Err(e) => c.check(false, format!("fit_logistic failed: {e}")),
    }
    c.verdict("6", "oracle suites")
}

fn criterion_7() -> Verdict {
    let mut c = Checks::new();
    let e = ExperimentConfig::default().evidence;
    let data = match ToyData::simulate_null(e.n, e.noise_precision, e.seed) {
        Ok(d) => d,
        Err(err) => {
            c.check(false, format!("simulation failed: {err}"));
            return c.verdict("7", "evidence ratio on null data");
        }
    };
    let even = HypothesisPriors::new(0.5, e.sigma_b).expect("priors");
    let skeptic = HypothesisPriors::new(0.01, e.sigma_b).expect("priors");
    let d = |n: usize, p: &HypothesisPriors| delta(&data.prefix(n).expect("prefix"), p).expect("delta");
    let (d10, d1000) = (d(10, &even), d(1000, &even));
    let d_skeptic = d(1000, &skeptic);
    c.check(d1000 > 5.0, format!("Delta(n = 1000, p_null = 0.5) = {d1000:.4} > 5"));
    c.check(d1000 > d10, format!("Delta(1000) = {d1000:.4} > Delta(10) = {d10:.4}"));
    c.check(d_skeptic < 1.0, format!("Delta(n = 1000, p_null = 0.01) = {d_skeptic:.4} < 1"));

    // Monte Carlo marginal under the positive hypothesis, relative to the
    // null likelihood: E[exp(lambda b suv - lambda b^2 svv / 2)], b half-normal.
    let lambda = data.noise_precision;
    let suv: f64 = data.u.iter().zip(&data.v).map(|(u, v)| u * v).sum();
    let svv: f64 = data.v.iter().map(|v| v * v).sum();
    let draws = 1_000_000;
    let mut rng = Rng::new(77);
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        let b = (e.sigma_b * rng.std_normal()).abs();
        let r = (lambda * b * suv - 0.5 * lambda * b * b * svv).exp();
        s1 += r;
        s2 += r * r;
    }
    let mc = s1 / draws as f64;
    let se = ((s2 / draws as f64 - mc * mc) / draws as f64).sqrt();
    let quad = (marginal_likelihood_positive(&data, &even).expect("quadrature")
        - marginal_likelihood_null(&data).expect("null"))
    .exp();
    c.check(
        (quad - mc).abs() < 3.0 * se,
        format!("quadrature {quad:.6e} vs Monte Carlo {mc:.6e} +/- {se:.1e} (10^6 draws): within 3 SE"),
    );
    c.verdict("7", "evidence ratio on null data")
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .expect("output dir")
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).expect("read")))
        .collect();
    files.sort();
    files
}

fn criterion_8() -> Verdict {
    let mut c = Checks::new();
    let dirs = [tempfile::tempdir().expect("tempdir"), tempfile::tempdir().expect("tempdir")];
    let base = ExperimentConfig {
        cohort: CohortConfig { n: 300, ..CohortConfig::default() },
        mcmc: McmcConfig { burn_in: 200, keep: 800, thin: 4, ..McmcConfig::default() },
        formats: vec![ReportFormat::Csv],
        ..ExperimentConfig::default()
    };
    let mut outputs = Vec::new();
    for dir in &dirs {
        let cfg = ExperimentConfig { out_dir: dir.path().to_path_buf(), ..base.clone() };
        match cmd_replicate(&cfg, None) {
            Ok(_) => outputs.push(csv_files(dir.path())),
            Err(e) => c.check(false, format!("replicate failed: {e}")),
        }
    }
    if outputs.len() == 2 {
        c.check(!outputs[0].is_empty(), format!("{} CSV files written per run", outputs[0].len()));
        c.check(outputs[0] == outputs[1], "every CSV file byte-identical across the two runs".into());
    }
    c.verdict("8", "replicate is deterministic given the seed")
}

fn main() -> ExitCode {
    println!("acceptance criteria");
    let (cohort, sim_time) = null_cohort();
    let verdicts = [
        criterion_1(&cohort, sim_time),
        criterion_2(&cohort),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
    ];
    for v in &verdicts {
        v.print();
    }
    let failed: Vec<_> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    println!(
        "acceptance: {} of {} criteria pass{}",
        verdicts.len() - failed.len(),
        verdicts.len(),
        if failed.is_empty() { String::new() } else { format!("; failing: {}", failed.join(", ")) }
    );
    if failed.is_empty() || std::env::var_os("ACCEPTANCE_STRICT").is_none() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
