//! One Gibbs scan and its blocks.
//!
//! Conjugate blocks are drawn exactly: the linear coefficients, `tau_eps`,
//! `tau_e`, `tau_x`, and `mu_x` under a normal prior. The latent log
//! exposures, the logistic coefficients, and `mu_x` under a lognormal prior
//! use random-walk Metropolis. Every acceptance test compares log densities.

use crate::naive::log1p_exp;
use crate::rng::GammaParams;

use super::model::{ExposureScale, ModelKind, ModelSpec, MuXPrior, Outcome};
use super::state::ChainState;

/// Bivariate normal full conditional in mean / precision form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianConditional {
    pub mean: [f64; 2],
    pub precision: [[f64; 2]; 2],
}

impl GaussianConditional {
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let [[a, b], [_, d]] = self.precision;
        let det = a * d - b * b;
        [[d / det, -b / det], [-b / det, a / det]]
    }
}

/// Conjugate gamma update of a normal precision from residuals, in
/// shape–scale form: `shape + n/2`, `scale / (1 + scale * sum(r^2) / 2)`.
pub fn full_conditional_precision(residuals: &[f64], prior: GammaParams) -> GammaParams {
    let ss: f64 = residuals.iter().map(|r| r * r).sum();
    precision_posterior(residuals.len(), ss, prior)
}

pub(crate) fn precision_posterior(n: usize, sum_sq: f64, prior: GammaParams) -> GammaParams {
    GammaParams { shape: prior.shape + 0.5 * n as f64, scale: prior.scale / (1.0 + prior.scale * 0.5 * sum_sq) }
}

/// Exact full conditional of `(beta0, beta)` in the linear model given the
/// current latent exposures and `tau_eps`.
pub fn full_conditional_coeffs_linear(state: &ChainState, spec: &ModelSpec) -> GaussianConditional {
    let Outcome::Continuous(y) = &spec.data.outcome else {
        panic!("full_conditional_coeffs_linear called on a binary outcome");
    };
    let tau_eps = state.tau_eps.expect("linear chain carries tau_eps");
    let (mut sc, mut scc, mut sy, mut scy) = (0.0, 0.0, 0.0, 0.0);
    for (&l, &yi) in state.latent.iter().zip(y) {
        let c = spec.scale.covariate(l);
        sc += c;
        scc += c * c;
        sy += yi;
        scy += c * yi;
    }
    let n = y.len() as f64;
    let p0 = spec.priors.intercept.precision();
    let p1 = spec.priors.slope.precision();
    let precision = [[p0 + tau_eps * n, tau_eps * sc], [tau_eps * sc, p1 + tau_eps * scc]];
    let rhs = [p0 * spec.priors.intercept.mean + tau_eps * sy, p1 * spec.priors.slope.mean + tau_eps * scy];
    let det = precision[0][0] * precision[1][1] - precision[0][1] * precision[1][0];
    assert!(det > 0.0 && det.is_finite(), "coefficient posterior precision is singular");
    let mean = [
        (precision[1][1] * rhs[0] - precision[0][1] * rhs[1]) / det,
        (precision[0][0] * rhs[1] - precision[1][0] * rhs[0]) / det,
    ];
    GaussianConditional { mean, precision }
}

/// Gibbs draw of the linear coefficients.
pub fn update_linear_coeffs(state: &mut ChainState, spec: &ModelSpec) {
    let cond = full_conditional_coeffs_linear(state, spec);
    // P = L L^T; a draw is mean + L^-T z.
    let [[a, b], [_, d]] = cond.precision;
    let l00 = a.sqrt();
    let l10 = b / l00;
    let l11 = (d - l10 * l10).sqrt();
    let z0 = state.rng.std_normal();
    let z1 = state.rng.std_normal();
    let x1 = z1 / l11;
    let x0 = (z0 - l10 * x1) / l00;
    state.intercept = cond.mean[0] + x0;
    state.slope = cond.mean[1] + x1;
}

pub fn update_tau_eps(state: &mut ChainState, spec: &ModelSpec) {
    let Outcome::Continuous(y) = &spec.data.outcome else { return };
    let prior = spec.priors.tau_eps.expect("validated linear prior");
    let ss: f64 = state
        .latent
        .iter()
        .zip(y)
        .map(|(&l, &yi)| (yi - state.intercept - state.slope * spec.scale.covariate(l)).powi(2))
        .sum();
    let post = precision_posterior(y.len(), ss, prior);
    state.tau_eps = Some(state.rng.std_gamma(post.shape) * post.scale);
}

pub fn update_tau_e(state: &mut ChainState, spec: &ModelSpec) {
    if let Some(fixed) = spec.clamp.tau_e {
        state.tau_e = fixed;
        return;
    }
    let ss: f64 = spec.data.log_w.iter().zip(&state.latent).map(|(w, l)| (w - l).powi(2)).sum();
    let post = precision_posterior(spec.data.len(), ss, spec.priors.tau_e);
    state.tau_e = state.rng.std_gamma(post.shape) * post.scale;
}

/// Updates the exposure-population parameters given the latent exposures:
/// `mu_x` first (conjugate under a normal prior, random-walk Metropolis on
/// `ln mu_x` under a lognormal prior), then `tau_x` by its gamma conditional.
pub fn update_mu_x_tau_x(state: &mut ChainState, spec: &ModelSpec) {
    let n = state.latent.len() as f64;
    let s1: f64 = state.latent.iter().sum();
    let s2: f64 = state.latent.iter().map(|l| l * l).sum();
    let sum_sq_about = |mu: f64| (s2 - 2.0 * mu * s1 + n * mu * mu).max(0.0);

    match spec.priors.mu_x {
        MuXPrior::Normal(prior) => {
            let precision = prior.precision() + n * state.tau_x;
            let mean = (prior.mean * prior.precision() + state.tau_x * s1) / precision;
            state.mu_x = mean + state.rng.std_normal() / precision.sqrt();
        }
        MuXPrior::LogNormal { log_mean, log_variance } => {
            // Target density of eta = ln(mu_x); the Jacobian cancels the 1/mu_x
            // of the lognormal density.
            let log_target =
                |eta: f64| -0.5 * state.tau_x * sum_sq_about(eta.exp()) - 0.5 * (eta - log_mean).powi(2) / log_variance;
            let eta = state.mu_x.ln();
            let proposal = eta + state.tuning.mu_x.scale() * state.rng.std_normal();
            let log_ratio = log_target(proposal) - log_target(eta);
            let accept = log_ratio >= 0.0 || state.rng.uniform_open0().ln() < log_ratio;
            if accept {
                state.mu_x = proposal.exp();
            }
            state.tuning.mu_x.record(accept);
        }
    }

    let post = precision_posterior(state.latent.len(), sum_sq_about(state.mu_x), spec.priors.tau_x);
    state.tau_x = state.rng.std_gamma(post.shape) * post.scale;
}

#[inline]
fn outcome_log_lik(kind_term: OutcomeTerm, intercept: f64, slope: f64, covariate: f64) -> f64 {
    match kind_term {
        OutcomeTerm::Continuous { y, tau_eps } => {
            let r = y - intercept - slope * covariate;
            -0.5 * tau_eps * r * r
        }
        OutcomeTerm::Binary { z } => {
            let eta = intercept + slope * covariate;
            f64::from(z) * eta - log1p_exp(eta)
        }
        OutcomeTerm::None => 0.0,
    }
}

#[derive(Clone, Copy)]
enum OutcomeTerm {
    Continuous { y: f64, tau_eps: f64 },
    Binary { z: u8 },
    None,
}

fn outcome_term(state: &ChainState, spec: &ModelSpec, i: usize) -> OutcomeTerm {
    match &spec.data.outcome {
        Outcome::Continuous(y) => OutcomeTerm::Continuous { y: y[i], tau_eps: state.tau_eps.unwrap_or(1.0) },
        Outcome::Binary(z) => OutcomeTerm::Binary { z: z[i] },
    }
}

/// Log full conditional of one latent log exposure, up to a constant.
#[inline]
fn latent_log_target(
    l: f64,
    log_w: f64,
    term: OutcomeTerm,
    state_params: (f64, f64, f64, f64, f64),
    scale: ExposureScale,
) -> f64 {
    let (intercept, slope, mu_x, tau_x, tau_e) = state_params;
    outcome_log_lik(term, intercept, slope, scale.covariate(l))
        - 0.5 * tau_e * (log_w - l).powi(2)
        - 0.5 * tau_x * (l - mu_x).powi(2)
}

fn latent_step(state: &mut ChainState, spec: &ModelSpec, i: usize, term: OutcomeTerm) -> bool {
    let params = (state.intercept, state.slope, state.mu_x, state.tau_x, state.tau_e);
    let step = state.tuning.latent.scale() / (state.tau_e + state.tau_x).sqrt();
    let current = state.latent[i];
    let proposal = current + step * state.rng.std_normal();
    let log_w = spec.data.log_w[i];
    let log_ratio = latent_log_target(proposal, log_w, term, params, spec.scale)
        - latent_log_target(current, log_w, term, params, spec.scale);
    let accept = log_ratio >= 0.0 || state.rng.uniform_open0().ln() < log_ratio;
    if accept {
        state.latent[i] = proposal;
    }
    state.tuning.latent.record(accept);
    accept
}

/// Random-walk Metropolis step on `l_i`, targeting the outcome likelihood
/// times the error and exposure densities. Returns whether the move was
/// accepted.
pub fn update_latent_exposure(state: &mut ChainState, spec: &ModelSpec, i: usize) -> bool {
    let term = outcome_term(state, spec, i);
    latent_step(state, spec, i, term)
}

/// The same step with the outcome term dropped, i.e. targeting only the
/// error and exposure models.
pub fn update_latent_exposure_without_outcome(state: &mut ChainState, spec: &ModelSpec, i: usize) -> bool {
    latent_step(state, spec, i, OutcomeTerm::None)
}

pub fn update_latents(state: &mut ChainState, spec: &ModelSpec) {
    if spec.clamp.latent_at_observed {
        return;
    }
    for i in 0..state.latent.len() {
        update_latent_exposure(state, spec, i);
    }
}

fn logistic_log_posterior(z: &[u8], covariate: &[f64], spec: &ModelSpec, intercept: f64, slope: f64) -> f64 {
    let lik: f64 = covariate
        .iter()
        .zip(z)
        .map(|(&c, &zi)| outcome_log_lik(OutcomeTerm::Binary { z: zi }, intercept, slope, c))
        .sum();
    lik + spec.priors.intercept.log_kernel(intercept) + spec.priors.slope.log_kernel(slope)
}

/// Metropolis steps on `(alpha0, alpha)` per scan.
pub const LOGISTIC_COEFF_STEPS: usize = 3;

/// Joint random-walk Metropolis on `(alpha0, alpha)`.
///
/// The proposal shape is the inverse information of the coefficients with
/// the Bernoulli weights frozen at the sample prevalence, so it depends on
/// the current latent exposures but not on the coefficients themselves and
/// the walk stays symmetric. Returns the number of accepted steps.
pub fn update_logistic_coeffs(state: &mut ChainState, spec: &ModelSpec) -> usize {
    let Outcome::Binary(z) = &spec.data.outcome else {
        panic!("update_logistic_coeffs called on a continuous outcome");
    };
    let covariate: Vec<f64> = state.latent.iter().map(|&l| spec.scale.covariate(l)).collect();
    let chol = logistic_proposal_chol(z, &covariate, spec);
    let s = state.tuning.coeffs.scale();
    let mut current = logistic_log_posterior(z, &covariate, spec, state.intercept, state.slope);
    let mut accepted = 0;
    for _ in 0..LOGISTIC_COEFF_STEPS {
        let z0 = state.rng.std_normal();
        let z1 = state.rng.std_normal();
        let cand = (state.intercept + s * chol[0] * z0, state.slope + s * (chol[1] * z0 + chol[2] * z1));
        let proposed = logistic_log_posterior(z, &covariate, spec, cand.0, cand.1);
        let log_ratio = proposed - current;
        let accept = log_ratio >= 0.0 || state.rng.uniform_open0().ln() < log_ratio;
        if accept {
            state.intercept = cand.0;
            state.slope = cand.1;
            current = proposed;
            accepted += 1;
        }
        state.tuning.coeffs.record(accept);
    }
    accepted
}

/// Lower Cholesky factor `[l00, l10, l11]` of the coefficient proposal
/// covariance.
fn logistic_proposal_chol(z: &[u8], covariate: &[f64], spec: &ModelSpec) -> [f64; 3] {
    let n = z.len() as f64;
    let cases = z.iter().map(|&v| f64::from(v)).sum::<f64>();
    let p = if n > 0.0 { ((cases + 0.5) / (n + 1.0)).clamp(1e-3, 0.5) } else { 0.5 };
    let v = p * (1.0 - p);
    let (mut sc, mut scc) = (0.0, 0.0);
    for &c in covariate {
        sc += c;
        scc += c * c;
    }
    let info = [spec.priors.intercept.precision() + v * n, v * sc, spec.priors.slope.precision() + v * scc];
    let det = info[0] * info[2] - info[1] * info[1];
    let cov = [info[2] / det, -info[1] / det, info[0] / det];
    let l00 = cov[0].sqrt();
    let l10 = cov[1] / l00;
    let l11 = (cov[2] - l10 * l10).max(cov[2] * 1e-12).sqrt();
    [l00, l10, l11]
}

/// Joint Metropolis move along the direction the observed exposures cannot
/// resolve. It keeps the total log-scale variance `s = 1/tau_e + 1/tau_x`
/// fixed and proposes a new error share `r = (1/tau_e) / s` on the logit
/// scale. Each latent exposure keeps its standardized position
/// `(l_i - m_i) * sqrt(tau_e + tau_x)` around its conditional mean
/// `m_i = (tau_e ln w_i + tau_x mu_x) / (tau_e + tau_x)`.
///
/// When the outcome is modelled on `log X`, the slope is carried along so
/// that `slope * (1 - r)`, the slope of the outcome on `ln W`, stays put, and
/// the intercept absorbs the shift of the latent means. For the linear
/// model `tau_eps` is integrated out of the acceptance ratio and redrawn
/// from its full conditional afterwards.
///
/// The acceptance ratio carries the Jacobians of the latent map
/// (`shrink^n`), of the slope map, and of `(tau_e, tau_x) -> (s, logit r)`,
/// the last proportional to `tau_e * tau_x`.
pub fn update_error_split(state: &mut ChainState, spec: &ModelSpec) -> bool {
    if spec.clamp.tau_e.is_some() || spec.clamp.latent_at_observed || state.latent.is_empty() {
        return false;
    }
    let n = state.latent.len() as f64;
    let (tau_e, tau_x, mu_x) = (state.tau_e, state.tau_x, state.mu_x);
    let total = 1.0 / tau_e + 1.0 / tau_x;
    let r = (1.0 / tau_e) / total;
    let logit = (r / (1.0 - r)).ln();
    let logit_new = logit + state.tuning.split.scale() * state.rng.std_normal();
    let r_new = 1.0 / (1.0 + (-logit_new).exp());
    if !(r_new > 0.0 && r_new < 1.0) {
        state.tuning.split.record(false);
        redraw_tau_eps(state, spec);
        return false;
    }
    let tau_e_new = 1.0 / (total * r_new);
    let tau_x_new = 1.0 / (total * (1.0 - r_new));

    let slope_factor = match spec.scale {
        ExposureScale::Log => (1.0 - r) / (1.0 - r_new),
        ExposureScale::Natural => 1.0,
    };
    let slope_new = state.slope * slope_factor;
    let intercept_new = match spec.scale {
        ExposureScale::Log => state.intercept + mu_x * (state.slope * r - slope_new * r_new),
        ExposureScale::Natural => state.intercept,
    };

    let sum_old = tau_e + tau_x;
    let sum_new = tau_e_new + tau_x_new;
    let shrink = (sum_old / sum_new).sqrt();
    let (mut err_old, mut err_new, mut exp_old, mut exp_new) = (0.0, 0.0, 0.0, 0.0);
    let mut proposal = Vec::with_capacity(state.latent.len());
    for (&l, &lw) in state.latent.iter().zip(&spec.data.log_w) {
        let m_old = (tau_e * lw + tau_x * mu_x) / sum_old;
        let m_new = (tau_e_new * lw + tau_x_new * mu_x) / sum_new;
        let l_new = m_new + (l - m_old) * shrink;
        err_old += (lw - l).powi(2);
        err_new += (lw - l_new).powi(2);
        exp_old += (l - mu_x).powi(2);
        exp_new += (l_new - mu_x).powi(2);
        proposal.push(l_new);
    }
    let outcome_delta = collapsed_outcome_log_lik(spec, &proposal, intercept_new, slope_new)
        - collapsed_outcome_log_lik(spec, &state.latent, state.intercept, state.slope);
    let log_post = |te: f64, tx: f64, err: f64, exp: f64, b0: f64, b1: f64| {
        0.5 * n * (te.ln() + tx.ln()) - 0.5 * te * err - 0.5 * tx * exp
            + spec.priors.tau_e.log_kernel(te)
            + spec.priors.tau_x.log_kernel(tx)
            + spec.priors.intercept.log_kernel(b0)
            + spec.priors.slope.log_kernel(b1)
    };
    let log_ratio = outcome_delta + log_post(tau_e_new, tau_x_new, err_new, exp_new, intercept_new, slope_new)
        - log_post(tau_e, tau_x, err_old, exp_old, state.intercept, state.slope)
        + n * shrink.ln()
        + slope_factor.ln()
        + (tau_e_new * tau_x_new).ln()
        - (tau_e * tau_x).ln();
    let accept = log_ratio >= 0.0 || state.rng.uniform_open0().ln() < log_ratio;
    if accept {
        state.tau_e = tau_e_new;
        state.tau_x = tau_x_new;
        state.intercept = intercept_new;
        state.slope = slope_new;
        state.latent = proposal;
    }
    state.tuning.split.record(accept);
    redraw_tau_eps(state, spec);
    accept
}

/// Outcome log likelihood given the latent exposures, with `tau_eps`
/// integrated over its gamma prior for the continuous outcome.
fn collapsed_outcome_log_lik(spec: &ModelSpec, latent: &[f64], intercept: f64, slope: f64) -> f64 {
    match &spec.data.outcome {
        Outcome::Continuous(y) => {
            let prior = spec.priors.tau_eps.expect("validated linear prior");
            let ss: f64 =
                latent.iter().zip(y).map(|(&l, &yi)| (yi - intercept - slope * spec.scale.covariate(l)).powi(2)).sum();
            -(prior.shape + 0.5 * y.len() as f64) * (1.0 / prior.scale + 0.5 * ss).ln()
        }
        Outcome::Binary(z) => latent
            .iter()
            .zip(z)
            .map(|(&l, &zi)| outcome_log_lik(OutcomeTerm::Binary { z: zi }, intercept, slope, spec.scale.covariate(l)))
            .sum(),
    }
}

fn redraw_tau_eps(state: &mut ChainState, spec: &ModelSpec) {
    if spec.kind() == ModelKind::Linear {
        update_tau_eps(state, spec);
    }
}

/// Metropolis move for the linear model on `log X` that travels the ridge
/// along which the likelihood of `(ln W, Y)` is exactly constant.
///
/// With the latent exposures integrated out, each pair `(ln w_i, y_i)` is
/// bivariate normal and depends on the parameters only through
/// `var(ln W) = 1/tau_x + 1/tau_e`, `cov = slope / tau_x`,
/// `var(Y) = slope^2 / tau_x + 1/tau_eps` and `E[Y] = intercept + slope * mu_x`.
/// The move proposes `ln tau_x' = ln tau_x + u` and solves for the other
/// four parameters so that all four moments are unchanged; the acceptance
/// ratio is therefore the prior ratio times the Jacobian
/// `e^{2u} (tau_e'/tau_e)^2 (tau_eps'/tau_eps)^2`. The latent exposures are
/// then drawn from their exact Gaussian full conditional. Returns whether
/// the parameter move was accepted; does nothing for other model shapes.
pub fn update_ridge_linear_log(state: &mut ChainState, spec: &ModelSpec) -> bool {
    let Outcome::Continuous(y) = &spec.data.outcome else { return false };
    if spec.scale != ExposureScale::Log || spec.clamp.tau_e.is_some() || spec.clamp.latent_at_observed {
        return false;
    }
    let tau_eps = state.tau_eps.expect("linear chain carries tau_eps");
    let (tau_x, tau_e, slope, intercept, mu_x) = (state.tau_x, state.tau_e, state.slope, state.intercept, state.mu_x);
    let var_w = 1.0 / tau_x + 1.0 / tau_e;
    let var_y = slope * slope / tau_x + 1.0 / tau_eps;

    let u = state.tuning.ridge.scale() * state.rng.std_normal();
    let tau_x_new = tau_x * u.exp();
    let slope_new = slope * u.exp();
    let intercept_new = intercept + (slope - slope_new) * mu_x;
    let inv_tau_e_new = var_w - 1.0 / tau_x_new;
    let inv_tau_eps_new = var_y - slope_new * slope_new / tau_x_new;

    let mut accept = false;
    if inv_tau_e_new > 0.0 && inv_tau_eps_new > 0.0 {
        let tau_e_new = 1.0 / inv_tau_e_new;
        let tau_eps_new = 1.0 / inv_tau_eps_new;
        let p = &spec.priors;
        let tau_eps_prior = p.tau_eps.expect("validated linear prior");
        let log_ratio = p.tau_x.log_kernel(tau_x_new) - p.tau_x.log_kernel(tau_x) + p.tau_e.log_kernel(tau_e_new)
            - p.tau_e.log_kernel(tau_e)
            + tau_eps_prior.log_kernel(tau_eps_new)
            - tau_eps_prior.log_kernel(tau_eps)
            + p.slope.log_kernel(slope_new)
            - p.slope.log_kernel(slope)
            + p.intercept.log_kernel(intercept_new)
            - p.intercept.log_kernel(intercept)
            + 2.0 * u
            + 2.0 * (tau_e_new / tau_e).ln()
            + 2.0 * (tau_eps_new / tau_eps).ln();
        accept = log_ratio >= 0.0 || state.rng.uniform_open0().ln() < log_ratio;
        if accept {
            state.tau_x = tau_x_new;
            state.tau_e = tau_e_new;
            state.slope = slope_new;
            state.intercept = intercept_new;
            state.tau_eps = Some(tau_eps_new);
        }
    }
    state.tuning.ridge.record(accept);

    let (tau_x, tau_e, slope, intercept, mu_x) = (state.tau_x, state.tau_e, state.slope, state.intercept, state.mu_x);
    let tau_eps = state.tau_eps.expect("linear chain carries tau_eps");
    let precision = tau_e + tau_x + slope * slope * tau_eps;
    let sd = 1.0 / precision.sqrt();
    for ((l, &lw), &yi) in state.latent.iter_mut().zip(&spec.data.log_w).zip(y) {
        let mean = (tau_e * lw + tau_x * mu_x + slope * tau_eps * (yi - intercept)) / precision;
        *l = mean + sd * state.rng.std_normal();
    }
    accept
}

/// Applies one adaptation batch to every Metropolis block.
pub fn adapt(state: &mut ChainState) {
    state.tuning.latent.adapt();
    state.tuning.mu_x.adapt();
    state.tuning.coeffs.adapt();
    state.tuning.split.adapt();
    state.tuning.ridge.adapt();
}

/// One full scan: coefficients, `tau_eps` (linear), `tau_e`, `mu_x`,
/// `tau_x`, the error-split move, the ridge move (linear on `log X`), then
/// every latent exposure.
pub fn scan(state: &mut ChainState, spec: &ModelSpec) {
    match spec.kind() {
        ModelKind::Linear => {
            update_linear_coeffs(state, spec);
            update_tau_eps(state, spec);
        }
        ModelKind::Logistic => {
            update_logistic_coeffs(state, spec);
        }
    }
    update_tau_e(state, spec);
    update_mu_x_tau_x(state, spec);
    update_error_split(state, spec);
    update_ridge_linear_log(state, spec);
    update_latents(state, spec);
    state.iteration += 1;
}
