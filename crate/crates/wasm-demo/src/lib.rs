//! Browser bindings for three small explorations of the measurement-error
//! model. Each entry point takes plain numbers and returns a JSON string;
//! the pure functions underneath are ordinary Rust and are tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use measerr::adjust::{
    run_chains, ExposureScale, McmcConfig, ModelKind, ModelSpec, PriorSet, SpreadReading, TauEPrior,
};
use measerr::cohort::{simulate_cohort, CohortConfig, OutcomeKind};
use measerr::evidence::{delta, HypothesisPriors, ToyData};
use measerr::naive::{correct_slope_reliability, fit_linear};
use measerr::{Error, Result};

const MAX_POINTS: usize = 400;
const HISTOGRAM_BINS: usize = 40;
const CURVE_POINTS: usize = 30;

#[derive(Debug, Serialize)]
pub struct Attenuation {
    pub reliability: f64,
    pub slope_true_exposure: f64,
    pub slope_observed: f64,
    pub slope_corrected: f64,
    /// Up to `MAX_POINTS` pairs of `(ln W, Y)` for a scatter plot.
    pub points: Vec<[f64; 2]>,
}

/// Simulates a continuous-outcome cohort on the log scale and compares the
/// slope on the true exposure with the attenuated slope on the observed one.
pub fn attenuation(n: usize, tau_e: f64, beta_true: f64, seed: u64) -> Result<Attenuation> {
    let cfg =
        CohortConfig { n, tau_e, beta_true, outcome_kind: OutcomeKind::Continuous, seed, ..CohortConfig::default() };
    let cohort = simulate_cohort(&cfg)?;
    let (log_w, y) = (cohort.log_w(), cohort.y());
    let log_x: Vec<f64> = cohort.records.iter().map(|r| r.x_true.ln()).collect();
    let truth = fit_linear(&log_x, &y)?;
    let observed = fit_linear(&log_w, &y)?;
    let reliability = cfg.log_scale_reliability();
    let step = n.div_ceil(MAX_POINTS).max(1);
    Ok(Attenuation {
        reliability,
        slope_true_exposure: truth.slope,
        slope_observed: observed.slope,
        slope_corrected: correct_slope_reliability(observed.slope, reliability)?,
        points: log_w.iter().zip(&y).step_by(step).map(|(&w, &y)| [w, y]).collect(),
    })
}

#[derive(Debug, Serialize)]
pub struct EvidenceCurve {
    pub n: Vec<usize>,
    pub delta: Vec<f64>,
}

/// Posterior odds of the null, Δ, on nested prefixes of one simulated null
/// data set, at roughly log-spaced sample sizes from 2 to `n_max`.
pub fn evidence_curve(
    n_max: usize,
    sigma_b: f64,
    noise_precision: f64,
    p_null: f64,
    seed: u64,
) -> Result<EvidenceCurve> {
    if n_max < 2 {
        return Err(Error::domain("n_max", format!("need at least 2 observations, got {n_max}")));
    }
    let data = ToyData::simulate_null(n_max, noise_precision, seed)?;
    let prior = HypothesisPriors::new(p_null, sigma_b)?;
    let mut ns: Vec<usize> = (0..CURVE_POINTS)
        .map(|k| (2.0 * (n_max as f64 / 2.0).powf(k as f64 / (CURVE_POINTS - 1) as f64)).round() as usize)
        .collect();
    ns.dedup();
    let delta = ns.iter().map(|&n| delta(&data.prefix(n)?, &prior)).collect::<Result<Vec<_>>>()?;
    Ok(EvidenceCurve { n: ns, delta })
}

#[derive(Debug, Serialize)]
pub struct Interval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Serialize)]
pub struct PosteriorRun {
    pub naive_slope: f64,
    pub beta: Interval,
    pub tau_e: Interval,
    pub rhat_beta: f64,
    pub histogram_edges: Vec<f64>,
    pub histogram_counts: Vec<usize>,
}

/// Adjusted linear fit on the log scale for a small cohort under one of
/// the error-precision priors.
pub fn posterior(n: usize, beta_true: f64, prior: &str, keep: usize, seed: u64) -> Result<PosteriorRun> {
    let prior: TauEPrior = prior.parse()?;
    let cohort = simulate_cohort(&CohortConfig {
        n,
        beta_true,
        outcome_kind: OutcomeKind::Continuous,
        seed,
        ..CohortConfig::default()
    })?;
    let naive = fit_linear(&cohort.log_w(), &cohort.y())?;
    let spec = ModelSpec::from_cohort(
        &cohort,
        ModelKind::Linear,
        PriorSet::linear(prior, SpreadReading::Variance),
        ExposureScale::Log,
    );
    let mcmc = McmcConfig { burn_in: keep / 2, keep, thin: 2, seed, ..McmcConfig::default() };
    let samples = run_chains(&spec, &mcmc)?;
    let interval = |name: &str| -> Result<Interval> {
        let s = samples.summarize(name)?;
        Ok(Interval { mean: s.mean, lo: s.p2_5, hi: s.p97_5 })
    };
    let beta = samples.pooled("beta")?;
    let (edges, counts) = histogram(&beta, HISTOGRAM_BINS);
    Ok(PosteriorRun {
        naive_slope: naive.slope,
        beta: interval("beta")?,
        tau_e: interval("tau_e")?,
        rhat_beta: samples.rhat("beta")?.rhat,
        histogram_edges: edges,
        histogram_counts: counts,
    })
}

fn histogram(xs: &[f64], bins: usize) -> (Vec<f64>, Vec<usize>) {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
    let mut counts = vec![0; bins];
    for &x in xs {
        counts[(((x - lo) / width) as usize).min(bins - 1)] += 1;
    }
    ((0..=bins).map(|k| lo + k as f64 * width).collect(), counts)
}

fn to_js<T: Serialize>(result: Result<T>) -> std::result::Result<String, JsValue> {
    result.and_then(|v| serde_json::to_string(&v).map_err(Error::from)).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = attenuation)]
pub fn attenuation_js(n: usize, tau_e: f64, beta_true: f64, seed: u64) -> std::result::Result<String, JsValue> {
    to_js(attenuation(n, tau_e, beta_true, seed))
}

#[wasm_bindgen(js_name = evidenceCurve)]
pub fn evidence_curve_js(
    n_max: usize,
    sigma_b: f64,
    noise_precision: f64,
    p_null: f64,
    seed: u64,
) -> std::result::Result<String, JsValue> {
    to_js(evidence_curve(n_max, sigma_b, noise_precision, p_null, seed))
}

#[wasm_bindgen(js_name = posterior)]
pub fn posterior_js(
    n: usize,
    beta_true: f64,
    prior: &str,
    keep: usize,
    seed: u64,
) -> std::result::Result<String, JsValue> {
    to_js(posterior(n, beta_true, prior, keep, seed))
}
