use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, PosteriorSummary, RhatReport};
use crate::error::{Error, Result};
use crate::naive::{fit_linear, fit_logistic};
use crate::rng::{domain, Rng};

use super::model::{ModelKind, ModelSpec, MuXPrior, Outcome};
use super::state::{AcceptanceRates, ChainState, Tuning};
use super::updates;

/// Iterations per adaptation batch during burn-in.
const ADAPT_BATCH: usize = 50;
/// Smallest `mu_x` used to start a chain under a lognormal prior.
const MU_X_FLOOR: f64 = 0.01;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Population parameters at their simulated values; slope starts spread
    /// over `{-0.5, 0, 0.5, ...}` across chains.
    #[default]
    AtTruth,
    /// Coefficients at the naive fit; latent exposures at the observed ones.
    NaiveStart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub n_chains: usize,
    pub burn_in: usize,
    pub keep: usize,
    pub thin: usize,
    pub seed: u64,
    pub init_strategy: InitStrategy,
}

impl Default for McmcConfig {
    /// Desk scale: 3 chains, 2,000 burn-in, 8,000 kept, every 8th retained.
    fn default() -> Self {
        McmcConfig {
            n_chains: 3,
            burn_in: 2_000,
            keep: 8_000,
            thin: 8,
            seed: 20_090_101,
            init_strategy: InitStrategy::AtTruth,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::domain("n_chains", "need at least one chain"));
        }
        if self.keep == 0 {
            return Err(Error::domain("keep", "must be positive"));
        }
        if self.thin == 0 {
            return Err(Error::domain("thin", "must be at least 1"));
        }
        Ok(())
    }

    pub fn retained_per_chain(&self) -> usize {
        self.keep / self.thin
    }
}

/// Retained draws of one chain, one column per monitored parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    pub columns: Vec<Vec<f64>>,
    pub acceptance: AcceptanceRates,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub kind: ModelKind,
    pub parameters: Vec<String>,
    pub chains: Vec<ChainDraws>,
    pub config: McmcConfig,
}

impl PosteriorSamples {
    pub fn retained_per_chain(&self) -> usize {
        self.chains.first().map_or(0, |c| c.columns.first().map_or(0, Vec::len))
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.parameters
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| Error::domain("parameter", format!("no parameter named `{name}`")))
    }

    pub fn chain(&self, name: &str, chain: usize) -> Result<&[f64]> {
        let idx = self.index(name)?;
        Ok(&self.chains[chain].columns[idx])
    }

    /// Draws of `name` from all chains, chain after chain.
    pub fn pooled(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.index(name)?;
        Ok(self.chains.iter().flat_map(|c| c.columns[idx].iter().copied()).collect())
    }

    pub fn summarize(&self, name: &str) -> Result<PosteriorSummary> {
        diagnostics::summarize(name, &self.pooled(name)?)
    }

    pub fn rhat(&self, name: &str) -> Result<RhatReport> {
        let idx = self.index(name)?;
        let chains: Vec<&[f64]> = self.chains.iter().map(|c| c.columns[idx].as_slice()).collect();
        diagnostics::rhat(name, &chains)
    }

    pub fn rhat_all(&self) -> Result<Vec<RhatReport>> {
        self.parameters.iter().map(|p| self.rhat(p)).collect()
    }

    /// Writes one CSV per chain (`<stem>_chain<k>.csv`), one row per
    /// retained draw.
    pub fn write_traces(&self, dir: &Path, stem: &str) -> Result<Vec<std::path::PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for (k, chain) in self.chains.iter().enumerate() {
            let path = dir.join(format!("{stem}_chain{k}.csv"));
            let mut out = BufWriter::new(fs::File::create(&path)?);
            writeln!(out, "iteration,{}", self.parameters.join(","))?;
            for row in 0..chain.columns[0].len() {
                write!(out, "{}", (row + 1) * self.config.thin)?;
                for col in &chain.columns {
                    write!(out, ",{:?}", col[row])?;
                }
                writeln!(out)?;
            }
            out.flush()?;
            paths.push(path);
        }
        Ok(paths)
    }
}

fn slope_offset(chain: usize) -> f64 {
    // 0 -> -0.5, 1 -> 0, 2 -> 0.5, 3 -> -1.0, 4 -> 1.0, ...
    match chain {
        0 => -0.5,
        1 => 0.0,
        2 => 0.5,
        k => {
            let step = ((k - 1) / 2) as f64 * 0.5;
            if k % 2 == 1 {
                -step
            } else {
                step
            }
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn project_mu_x(prior: &MuXPrior, mu_x: f64) -> f64 {
    match prior {
        MuXPrior::Normal(_) => mu_x,
        MuXPrior::LogNormal { .. } => mu_x.max(MU_X_FLOOR),
    }
}

/// Builds the starting state of chain `chain`.
pub fn initial_state(spec: &ModelSpec, mcmc: &McmcConfig, chain: usize) -> Result<ChainState> {
    let rng = Rng::stream(mcmc.seed, domain::CHAIN, chain as u64);
    let data = &spec.data;
    let n = data.len();
    let kind = spec.kind();

    let (intercept, slope, tau_eps, mu_x, tau_x, tau_e, latent);
    match mcmc.init_strategy {
        InitStrategy::AtTruth => {
            let t = spec.truth;
            mu_x = project_mu_x(&spec.priors.mu_x, t.mu_x);
            tau_x = t.tau_x;
            tau_e = spec.clamp.tau_e.unwrap_or(t.tau_e);
            latent = data
                .log_w
                .iter()
                .map(|&w| if spec.clamp.latent_at_observed { w } else { (tau_e * w + tau_x * mu_x) / (tau_e + tau_x) })
                .collect::<Vec<f64>>();
            intercept = match &data.outcome {
                Outcome::Continuous(y) => mean(y),
                Outcome::Binary(z) => {
                    let p = z.iter().map(|&v| f64::from(v)).sum::<f64>() / n.max(1) as f64;
                    let p = p.clamp(1e-3, 1.0 - 1e-3);
                    (p / (1.0 - p)).ln()
                }
            };
            slope = slope_offset(chain);
            tau_eps = (kind == ModelKind::Linear).then_some(t.tau_y);
        }
        InitStrategy::NaiveStart => {
            let covariate: Vec<f64> = data.log_w.iter().map(|&w| spec.scale.covariate(w)).collect();
            let lw_mean = mean(&data.log_w);
            let lw_var = data.log_w.iter().map(|w| (w - lw_mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
            let split = if lw_var > 0.0 { 2.0 / lw_var } else { 1.0 };
            mu_x = project_mu_x(&spec.priors.mu_x, lw_mean);
            tau_x = split;
            tau_e = spec.clamp.tau_e.unwrap_or(split);
            latent = data.log_w.clone();
            match &data.outcome {
                Outcome::Continuous(y) => {
                    let fit = fit_linear(&covariate, y)?;
                    intercept = fit.intercept;
                    slope = fit.slope;
                    let rss: f64 =
                        covariate.iter().zip(y).map(|(c, yi)| (yi - fit.intercept - fit.slope * c).powi(2)).sum();
                    tau_eps = Some(((n as f64 - 2.0) / rss).clamp(1e-8, 1e8));
                }
                Outcome::Binary(z) => {
                    let fit = fit_logistic(&covariate, z)?;
                    intercept = fit.intercept;
                    slope = fit.slope;
                    tau_eps = None;
                }
            }
        }
    }
    let state = ChainState {
        intercept,
        slope,
        tau_eps,
        mu_x,
        tau_x,
        tau_e,
        latent,
        rng,
        iteration: 0,
        tuning: Tuning::default(),
    };
    check_initial(&state, spec)?;
    Ok(state)
}

/// Rejects starting points where some factor of the log posterior is not
/// finite, naming the first offending parameter.
pub fn check_initial(state: &ChainState, spec: &ModelSpec) -> Result<()> {
    let fail = |param: &str| Err(Error::Initialization { param: param.to_string() });
    let p = &spec.priors;
    let kind = spec.kind();
    if !(spec.priors.intercept.log_kernel(state.intercept).is_finite()) {
        return fail(kind.intercept_name());
    }
    if !(spec.priors.slope.log_kernel(state.slope).is_finite()) {
        return fail(kind.slope_name());
    }
    if let (ModelKind::Linear, Some(prior)) = (kind, p.tau_eps) {
        if !state.tau_eps.is_some_and(|t| prior.log_kernel(t).is_finite()) {
            return fail("tau_eps");
        }
    }
    if !p.mu_x.log_density(state.mu_x).is_finite() {
        return fail("mu_x");
    }
    if !p.tau_x.log_kernel(state.tau_x).is_finite() {
        return fail("tau_x");
    }
    if spec.clamp.tau_e.is_none() && !p.tau_e.log_kernel(state.tau_e).is_finite() {
        return fail("tau_e");
    }
    if let Some(i) = state.latent.iter().position(|l| !l.is_finite()) {
        return fail(&format!("x[{i}]"));
    }
    let lik: f64 = match &spec.data.outcome {
        Outcome::Continuous(y) => {
            let tau = state.tau_eps.unwrap_or(1.0);
            state
                .latent
                .iter()
                .zip(y)
                .map(|(&l, yi)| -0.5 * tau * (yi - state.intercept - state.slope * spec.scale.covariate(l)).powi(2))
                .sum()
        }
        Outcome::Binary(z) => crate::naive::logistic_loglik(
            &state.latent.iter().map(|&l| spec.scale.covariate(l)).collect::<Vec<_>>(),
            z,
            state.intercept,
            state.slope,
        ),
    };
    if !lik.is_finite() {
        return fail(&format!("{} (outcome likelihood)", kind.slope_name()));
    }
    Ok(())
}

/// Runs one chain to completion and returns its retained draws.
pub fn run_chain(spec: &ModelSpec, mcmc: &McmcConfig, chain: usize) -> Result<ChainDraws> {
    let mut state = initial_state(spec, mcmc, chain)?;
    let kind = spec.kind();
    for it in 1..=mcmc.burn_in {
        updates::scan(&mut state, spec);
        if it % ADAPT_BATCH == 0 {
            updates::adapt(&mut state);
        }
    }
    state.tuning.reset_counts();

    let names = kind.parameter_names();
    let retained = mcmc.retained_per_chain();
    let mut columns = vec![Vec::with_capacity(retained); names.len()];
    for it in 1..=mcmc.keep {
        updates::scan(&mut state, spec);
        if it % mcmc.thin == 0 {
            let row = match kind {
                ModelKind::Linear => vec![
                    state.intercept,
                    state.slope,
                    state.tau_eps.unwrap_or(f64::NAN),
                    state.tau_e,
                    state.mu_x,
                    state.tau_x,
                ],
                ModelKind::Logistic => vec![state.intercept, state.slope, state.tau_e, state.mu_x, state.tau_x],
            };
            for (col, v) in columns.iter_mut().zip(row) {
                if !v.is_finite() {
                    return Err(Error::Numerical(format!("chain {chain}: non-finite draw at iteration {it}")));
                }
                col.push(v);
            }
        }
    }
    Ok(ChainDraws { columns, acceptance: state.acceptance() })
}

/// Runs every chain (in parallel) and collects their retained draws.
pub fn run_chains(spec: &ModelSpec, mcmc: &McmcConfig) -> Result<PosteriorSamples> {
    spec.validate()?;
    mcmc.validate()?;
    let chains = (0..mcmc.n_chains).into_par_iter().map(|k| run_chain(spec, mcmc, k)).collect::<Result<Vec<_>>>()?;
    Ok(PosteriorSamples {
        kind: spec.kind(),
        parameters: spec.kind().parameter_names().into_iter().map(String::from).collect(),
        chains,
        config: mcmc.clone(),
    })
}
