use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use measerr::adjust::{ExposureScale, InitStrategy, ModelKind, SpreadReading, TauEPrior};
use measerr::cohort::OutcomeKind;
use measerr::harness::{
    cmd_adjust, cmd_evidence, cmd_naive, cmd_replicate, cmd_simulate, ExperimentConfig, ReportFormat,
};
use measerr::naive::FitResult;
use measerr::Result;

/// Simulate multiplicative exposure measurement error, fit naive and
/// Bayesian-adjusted outcome models, and report the results.
#[derive(Parser, Debug)]
#[command(name = "measerr", version)]
struct Cli {
    /// Master seed for cohort simulation, samplers and evidence data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON experiment configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for emitted reports.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Report formats (repeat or comma-separate): csv, json, markdown.
    #[arg(long, global = true, value_delimiter = ',')]
    format: Vec<ReportFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a cohort CSV.
    Simulate {
        #[command(flatten)]
        cohort: CohortArgs,
        /// Output file; defaults to `<out-dir>/cohort.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit the naive model on observed exposure.
    Naive {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long, default_value = "linear")]
        kind: ModelKind,
        #[arg(long, value_enum)]
        scale: Option<ScaleArg>,
    },
    /// Bayesian measurement-error adjustment for one prior variant.
    Adjust {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long, default_value = "linear")]
        kind: ModelKind,
        /// Prior on tau_e: uninformative, typeA, typeB, typeC.
        #[arg(long, default_value = "uninformative")]
        prior: TauEPrior,
        #[command(flatten)]
        mcmc: McmcArgs,
    },
    /// Run the prior-variant by model grid and emit the posterior tables.
    Replicate {
        /// Use an existing cohort instead of simulating one.
        #[arg(long)]
        cohort_file: Option<PathBuf>,
        #[command(flatten)]
        cohort: CohortArgs,
        /// Prior variants to run (comma-separated).
        #[arg(long, value_delimiter = ',')]
        priors: Vec<TauEPrior>,
        /// Outcome models to run (comma-separated).
        #[arg(long, value_delimiter = ',')]
        kinds: Vec<ModelKind>,
        #[command(flatten)]
        mcmc: McmcArgs,
    },
    /// Evidence ratio of the null against a positive slope on toy data.
    Evidence {
        /// Size of the simulated null dataset.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        sigma_b: Option<f64>,
        #[arg(long)]
        noise_precision: Option<f64>,
        /// Prefix sizes to evaluate (comma-separated).
        #[arg(long, value_delimiter = ',')]
        n_values: Vec<usize>,
        /// Prior null masses to evaluate at the full size (comma-separated).
        #[arg(long, value_delimiter = ',')]
        p_null_values: Vec<f64>,
    },
}

#[derive(Args, Debug)]
struct CohortArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    mu_x: Option<f64>,
    #[arg(long)]
    tau_x: Option<f64>,
    #[arg(long)]
    tau_e: Option<f64>,
    #[arg(long)]
    tau_y: Option<f64>,
    #[arg(long)]
    pi: Option<f64>,
    #[arg(long)]
    beta_true: Option<f64>,
    #[arg(long)]
    alpha_true: Option<f64>,
    #[arg(long, value_enum)]
    outcome: Option<OutcomeArg>,
}

#[derive(Args, Debug)]
struct McmcArgs {
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Post-burn-in iterations per chain before thinning.
    #[arg(long)]
    keep: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    #[arg(long, value_enum)]
    scale: Option<ScaleArg>,
    /// How the second argument of the lognormal prior on mu_x is read.
    #[arg(long, value_enum)]
    mu_x_spread: Option<SpreadArg>,
    /// Write per-chain trace CSVs.
    #[arg(long)]
    emit_traces: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScaleArg {
    Natural,
    Log,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutcomeArg {
    Continuous,
    Binary,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InitArg {
    Truth,
    Naive,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SpreadArg {
    Variance,
    Precision,
}

impl From<ScaleArg> for ExposureScale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Natural => ExposureScale::Natural,
            ScaleArg::Log => ExposureScale::Log,
        }
    }
}

impl CohortArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        let c = &mut cfg.cohort;
        set(&mut c.n, self.n);
        set(&mut c.mu_x, self.mu_x);
        set(&mut c.tau_x, self.tau_x);
        set(&mut c.tau_e, self.tau_e);
        set(&mut c.tau_y, self.tau_y);
        set(&mut c.pi, self.pi);
        set(&mut c.beta_true, self.beta_true);
        set(&mut c.alpha_true, self.alpha_true);
        if let Some(o) = self.outcome {
            c.outcome_kind = match o {
                OutcomeArg::Continuous => OutcomeKind::Continuous,
                OutcomeArg::Binary => OutcomeKind::Binary,
                OutcomeArg::Both => OutcomeKind::Both,
            };
        }
    }
}

impl McmcArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        let m = &mut cfg.mcmc;
        set(&mut m.n_chains, self.chains);
        set(&mut m.burn_in, self.burn_in);
        set(&mut m.keep, self.keep);
        set(&mut m.thin, self.thin);
        if let Some(i) = self.init {
            m.init_strategy = match i {
                InitArg::Truth => InitStrategy::AtTruth,
                InitArg::Naive => InitStrategy::NaiveStart,
            };
        }
        if let Some(s) = self.scale {
            cfg.exposure_scale = s.into();
        }
        if let Some(s) = self.mu_x_spread {
            cfg.mu_x_prior_reading = match s {
                SpreadArg::Variance => SpreadReading::Variance,
                SpreadArg::Precision => SpreadReading::Precision,
            };
        }
        cfg.emit_traces |= self.emit_traces;
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn print_fit(kind: ModelKind, fit: &FitResult) {
    println!(
        "{kind:?}: slope {:.6} (SE {:.6}), 95% CI [{:.6}, {:.6}]",
        fit.slope, fit.slope_se, fit.ci95_lo, fit.ci95_hi
    );
    if kind == ModelKind::Logistic {
        let (or, lo, hi) = fit.odds_ratio();
        println!("odds ratio {or:.4}, 95% CI [{lo:.4}, {hi:.4}]");
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    set(&mut cfg.out_dir, cli.out_dir);
    if !cli.format.is_empty() {
        cfg.formats = cli.format;
    }

    match cli.command {
        Command::Simulate { cohort, output } => {
            cohort.apply(&mut cfg);
            let path = cmd_simulate(&cfg, output.as_deref())?;
            println!("wrote {} ({} subjects)", path.display(), cfg.cohort.n);
        }
        Command::Naive { cohort, kind, scale } => {
            if let Some(s) = scale {
                cfg.exposure_scale = s.into();
            }
            let fit = cmd_naive(&cohort, kind, &cfg)?;
            print_fit(kind, &fit);
        }
        Command::Adjust { cohort, kind, prior, mcmc } => {
            mcmc.apply(&mut cfg);
            let out = cmd_adjust(&cohort, kind, prior, &cfg)?;
            for s in &out.cell.summaries {
                println!("{:<10} mean {:>10.4}  95% CrI [{:.4}, {:.4}]", s.parameter, s.mean, s.p2_5, s.p97_5);
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Replicate { cohort_file, cohort, priors, kinds, mcmc } => {
            cohort.apply(&mut cfg);
            mcmc.apply(&mut cfg);
            if !priors.is_empty() {
                cfg.prior_variants = priors;
            }
            if !kinds.is_empty() {
                cfg.model_kinds = kinds;
            }
            let report = cmd_replicate(&cfg, cohort_file.as_deref())?;
            for t in &report.tables {
                println!("{:?}", t.kind);
                for c in &t.cells {
                    let a = c.association();
                    let status = if c.gate_passed { "converged" } else { "unconverged" };
                    println!("  {:<28} {:>9.4} [{:.4}, {:.4}] {status}", c.prior.label(), a.mean, a.p2_5, a.p97_5);
                }
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Evidence { n, sigma_b, noise_precision, n_values, p_null_values } => {
            let e = &mut cfg.evidence;
            set(&mut e.n, n);
            set(&mut e.sigma_b, sigma_b);
            set(&mut e.noise_precision, noise_precision);
            if !n_values.is_empty() {
                e.n_values = n_values;
            }
            if !p_null_values.is_empty() {
                e.p_null_values = p_null_values;
            }
            for r in cmd_evidence(&cfg)? {
                println!("n={:<6} p_null={:<6} delta={:.4}", r.n, r.p_null, r.delta);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
