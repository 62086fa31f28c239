use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::report::{Cell, Provenance, Table};
use crate::adjust::{
    run_chains, AcceptanceRates, ExposureScale, ModelKind, ModelSpec, PosteriorSamples, PriorSet, TauEPrior,
};
use crate::cohort::{read_cohort, simulate_cohort, write_cohort, Cohort};
use crate::diagnostics::{transform_summary, PosteriorSummary, RhatReport};
use crate::error::{Error, Result};
use crate::evidence::{delta_table, DeltaRow, ToyData};
use crate::naive::{fit_linear, fit_logistic, FitResult};

/// Name of the odds-ratio row in logistic summaries.
pub const ODDS_RATIO: &str = "odds_ratio";

fn covariate(cohort: &Cohort, scale: ExposureScale) -> Vec<f64> {
    cohort.records.iter().map(|r| scale.covariate(r.w_obs.ln())).collect()
}

pub fn cmd_simulate(cfg: &ExperimentConfig, output: Option<&Path>) -> Result<PathBuf> {
    cfg.cohort.validate()?;
    cfg.ensure_out_dir()?;
    let cohort = simulate_cohort(&cfg.cohort)?;
    let path = output.map_or_else(|| cfg.out_dir.join("cohort.csv"), Path::to_path_buf);
    write_cohort(&cohort, &path)?;
    Ok(path)
}

/// Naive fit of one outcome on the observed exposure.
pub fn naive_fit(cohort: &Cohort, kind: ModelKind, scale: ExposureScale) -> Result<FitResult> {
    let w = covariate(cohort, scale);
    match kind {
        ModelKind::Linear => fit_linear(&w, &cohort.y()),
        ModelKind::Logistic => fit_logistic(&w, &cohort.z()),
    }
}

fn naive_table(kind: ModelKind, fit: &FitResult) -> Table {
    let mut t =
        Table::new(&["model", "intercept", "slope", "slope_se", "ci95_lo", "ci95_hi", "converged", "iterations"]);
    t.push(vec![
        Cell::Text(format!("{kind:?}").to_lowercase()),
        Cell::Num(fit.intercept),
        Cell::Num(fit.slope),
        Cell::Num(fit.slope_se),
        Cell::Num(fit.ci95_lo),
        Cell::Num(fit.ci95_hi),
        Cell::Bool(fit.converged),
        Cell::Int(fit.iterations),
    ]);
    if kind == ModelKind::Logistic {
        let (or, lo, hi) = fit.odds_ratio();
        t.columns.extend(["odds_ratio", "or_ci95_lo", "or_ci95_hi"].map(String::from));
        t.rows[0].extend([Cell::Num(or), Cell::Num(lo), Cell::Num(hi)]);
    }
    t
}

#[derive(Serialize)]
struct CohortProvenance<'a> {
    experiment: &'a ExperimentConfig,
    cohort: &'a crate::cohort::CohortConfig,
}

pub fn cmd_naive(cohort_path: &Path, kind: ModelKind, cfg: &ExperimentConfig) -> Result<FitResult> {
    let cohort = read_cohort(cohort_path)?;
    cfg.ensure_out_dir()?;
    let fit = naive_fit(&cohort, kind, cfg.exposure_scale)?;
    let prov = Provenance::new("naive", &CohortProvenance { experiment: cfg, cohort: &cohort.config })?;
    let stem = format!("naive_{}", kind_key(kind));
    naive_table(kind, &fit).write(&cfg.out_dir, &stem, &cfg.formats, &prov, "Naive fit")?;
    Ok(fit)
}

fn kind_key(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Linear => "linear",
        ModelKind::Logistic => "logistic",
    }
}

/// Result of one adjusted fit (one prior variant, one outcome model).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellResult {
    pub kind: ModelKind,
    pub prior: TauEPrior,
    /// One summary per monitored parameter, plus the odds ratio for logistic.
    pub summaries: Vec<PosteriorSummary>,
    pub rhat: Vec<RhatReport>,
    pub gate_passed: bool,
    pub acceptance: Vec<AcceptanceRates>,
}

impl CellResult {
    pub fn summary(&self, name: &str) -> Option<&PosteriorSummary> {
        self.summaries.iter().find(|s| s.parameter == name)
    }

    pub fn rhat_of(&self, name: &str) -> Option<f64> {
        self.rhat.iter().find(|r| r.parameter == name).map(|r| r.rhat)
    }

    /// The association summary: `beta`, or the odds ratio `exp(alpha)`.
    pub fn association(&self) -> &PosteriorSummary {
        let name = match self.kind {
            ModelKind::Linear => "beta",
            ModelKind::Logistic => ODDS_RATIO,
        };
        self.summary(name).expect("association summary present")
    }

    pub fn null_value(&self) -> f64 {
        match self.kind {
            ModelKind::Linear => 0.0,
            ModelKind::Logistic => 1.0,
        }
    }
}

/// Parameters whose R-hat must pass the gate: the outcome-model
/// coefficients.
pub fn gated_parameters(kind: ModelKind) -> [&'static str; 2] {
    [kind.intercept_name(), kind.slope_name()]
}

pub fn summarize_samples(samples: &PosteriorSamples, prior: TauEPrior) -> Result<CellResult> {
    let kind = samples.kind;
    let rhat = samples.rhat_all()?;
    let gate_passed = gated_parameters(kind).iter().all(|p| rhat.iter().any(|r| r.parameter == *p && r.passes_gate()));
    let mut summaries = samples.parameters.iter().map(|p| samples.summarize(p)).collect::<Result<Vec<_>>>()?;
    if kind == ModelKind::Logistic {
        summaries.push(transform_summary(ODDS_RATIO, &samples.pooled("alpha")?, f64::exp)?);
    }
    Ok(CellResult {
        kind,
        prior,
        summaries,
        rhat,
        gate_passed,
        acceptance: samples.chains.iter().map(|c| c.acceptance.clone()).collect(),
    })
}

/// Runs the sampler for one cell and summarizes it.
pub fn adjust_cohort(
    cohort: &Cohort,
    kind: ModelKind,
    prior: TauEPrior,
    cfg: &ExperimentConfig,
) -> Result<(CellResult, PosteriorSamples)> {
    let priors = PriorSet::for_kind(kind, prior, cfg.mu_x_prior_reading);
    let spec = ModelSpec::from_cohort(cohort, kind, priors, cfg.exposure_scale);
    let samples = run_chains(&spec, &cfg.mcmc)?;
    Ok((summarize_samples(&samples, prior)?, samples))
}

fn summary_table(summaries: &[PosteriorSummary]) -> Table {
    let mut t = Table::new(&["parameter", "mean", "p2_5", "p97_5", "n_retained"]);
    for s in summaries {
        t.push(vec![
            Cell::Text(s.parameter.clone()),
            Cell::Num(s.mean),
            Cell::Num(s.p2_5),
            Cell::Num(s.p97_5),
            Cell::Int(s.n_retained),
        ]);
    }
    t
}

fn rhat_table(reports: &[RhatReport], kind: ModelKind) -> Table {
    let gated = gated_parameters(kind);
    let mut t = Table::new(&["parameter", "rhat", "gated", "passes"]);
    for r in reports {
        t.push(vec![
            Cell::Text(r.parameter.clone()),
            Cell::Num(r.rhat),
            Cell::Bool(gated.contains(&r.parameter.as_str())),
            Cell::Bool(r.passes_gate()),
        ]);
    }
    t
}

#[derive(Clone, Debug)]
pub struct AdjustOutcome {
    pub cell: CellResult,
    pub files: Vec<PathBuf>,
}

/// Adjusted analysis of a cohort file. Summaries are written only when the
/// convergence gate passes; otherwise the R-hat report is written and a
/// gate error returned.
pub fn cmd_adjust(
    cohort_path: &Path,
    kind: ModelKind,
    prior: TauEPrior,
    cfg: &ExperimentConfig,
) -> Result<AdjustOutcome> {
    cfg.mcmc.validate()?;
    let cohort = read_cohort(cohort_path)?;
    cfg.ensure_out_dir()?;
    let (cell, samples) = adjust_cohort(&cohort, kind, prior, cfg)?;
    let prov = Provenance::new("adjust", &CohortProvenance { experiment: cfg, cohort: &cohort.config })?;
    let stem = format!("adjust_{}_{}", kind_key(kind), prior.key());
    let mut files = rhat_table(&cell.rhat, kind).write(
        &cfg.out_dir,
        &format!("{stem}_rhat"),
        &cfg.formats,
        &prov,
        "Potential scale reduction factors",
    )?;
    if cfg.emit_traces {
        files.extend(samples.write_traces(&cfg.out_dir, &format!("{stem}_trace"))?);
    }
    if !cell.gate_passed {
        let worst = cell
            .rhat
            .iter()
            .filter(|r| gated_parameters(kind).contains(&r.parameter.as_str()))
            .map(|r| format!("{}={:.4}", r.parameter, r.rhat))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(Error::ConvergenceGate(format!("R-hat >= 1.1 ({worst}); summaries withheld")));
    }
    files.extend(summary_table(&cell.summaries).write(
        &cfg.out_dir,
        &format!("{stem}_summary"),
        &cfg.formats,
        &prov,
        "Posterior summaries",
    )?);
    Ok(AdjustOutcome { cell, files })
}

#[derive(Clone, Debug)]
pub struct ReplicationTable {
    pub kind: ModelKind,
    pub naive: FitResult,
    pub cells: Vec<CellResult>,
}

impl ReplicationTable {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&[
            "prior",
            "distribution",
            "parameter",
            "mean",
            "p2_5",
            "p97_5",
            "n_retained",
            "rhat",
            "status",
            "cri_contains_null",
        ]);
        for cell in &self.cells {
            let g = cell.prior.gamma();
            let assoc = cell.association();
            let rhat = cell.rhat_of(self.kind.slope_name()).unwrap_or(f64::NAN);
            let mut row = vec![
                Cell::Text(cell.prior.label().into()),
                Cell::Text(format!("Gamma({}; {})", g.shape, g.scale)),
                Cell::Text(assoc.parameter.clone()),
            ];
            if cell.gate_passed {
                row.extend([
                    Cell::Num(assoc.mean),
                    Cell::Num(assoc.p2_5),
                    Cell::Num(assoc.p97_5),
                    Cell::Int(assoc.n_retained),
                    Cell::Num(rhat),
                    Cell::Text("converged".into()),
                    Cell::Bool(assoc.contains(cell.null_value())),
                ]);
            } else {
                row.extend([
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Num(rhat),
                    Cell::Text("unconverged".into()),
                    Cell::Empty,
                ]);
            }
            t.push(row);
        }
        t
    }
}

#[derive(Clone, Debug)]
pub struct ReplicationReport {
    pub tables: Vec<ReplicationTable>,
    pub files: Vec<PathBuf>,
}

/// Runs the prior-variant by outcome-model grid on one cohort and writes one
/// table per outcome model.
pub fn replicate_cohort(cohort: &Cohort, cfg: &ExperimentConfig) -> Result<Vec<ReplicationTable>> {
    cfg.validate()?;
    let mut variants = cfg.prior_variants.clone();
    variants.sort();
    variants.dedup();
    let mut kinds = cfg.model_kinds.clone();
    kinds.sort();
    kinds.dedup();

    let grid: Vec<(ModelKind, TauEPrior)> = kinds.iter().flat_map(|&k| variants.iter().map(move |&v| (k, v))).collect();
    let cells = grid
        .par_iter()
        .map(|&(kind, prior)| adjust_cohort(cohort, kind, prior, cfg).map(|(cell, _)| cell))
        .collect::<Result<Vec<_>>>()?;

    kinds
        .iter()
        .map(|&kind| {
            Ok(ReplicationTable {
                kind,
                naive: naive_fit(cohort, kind, cfg.exposure_scale)?,
                cells: cells.iter().filter(|c| c.kind == kind).cloned().collect(),
            })
        })
        .collect()
}

pub fn cmd_replicate(cfg: &ExperimentConfig, cohort_path: Option<&Path>) -> Result<ReplicationReport> {
    cfg.validate()?;
    let cohort = match cohort_path {
        Some(p) => read_cohort(p)?,
        None => simulate_cohort(&cfg.cohort)?,
    };
    cfg.ensure_out_dir()?;
    let tables = replicate_cohort(&cohort, cfg)?;
    let prov = Provenance::new("replicate", &CohortProvenance { experiment: cfg, cohort: &cohort.config })?;
    let mut files = Vec::new();
    for table in &tables {
        let (stem, title) = match table.kind {
            ModelKind::Linear => ("table2_linear", "Posterior of the slope (beta), linear outcome model"),
            ModelKind::Logistic => {
                ("table3_logistic", "Posterior of the odds ratio (exp(alpha)), logistic outcome model")
            }
        };
        files.extend(table.to_table().write(&cfg.out_dir, stem, &cfg.formats, &prov, title)?);
        let naive_stem = format!("naive_{}", kind_key(table.kind));
        files.extend(naive_table(table.kind, &table.naive).write(
            &cfg.out_dir,
            &naive_stem,
            &cfg.formats,
            &prov,
            "Naive fit",
        )?);
    }
    Ok(ReplicationReport { tables, files })
}

pub fn evidence_rows(cfg: &ExperimentConfig) -> Result<Vec<DeltaRow>> {
    let e = &cfg.evidence;
    let data = ToyData::simulate_null(e.n, e.noise_precision, e.seed)?;
    delta_table(&data, e.sigma_b, &e.n_values, &e.p_null_values)
}

pub fn cmd_evidence(cfg: &ExperimentConfig) -> Result<Vec<DeltaRow>> {
    let rows = evidence_rows(cfg)?;
    cfg.ensure_out_dir()?;
    let mut t = Table::new(&["n", "p_null", "sigma_b", "log_marginal_null", "log_marginal_positive", "delta"]);
    for r in &rows {
        t.push(vec![
            Cell::Int(r.n),
            Cell::Num(r.p_null),
            Cell::Num(r.sigma_b),
            Cell::Num(r.log_marginal_null),
            Cell::Num(r.log_marginal_positive),
            Cell::Num(r.delta),
        ]);
    }
    let prov = Provenance::new("evidence", &cfg.evidence)?;
    t.write(&cfg.out_dir, "evidence", &cfg.formats, &prov, "Evidence ratio (null vs positive slope)")?;
    Ok(rows)
}
