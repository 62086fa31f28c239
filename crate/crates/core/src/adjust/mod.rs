//! Bayesian adjustment for classical multiplicative exposure error.
//!
//! Three submodels are linked by conditional independence: an outcome model
//! (normal for `Y`, logistic for `Z`) on the true exposure, the error model
//! `ln W ~ N(ln X, 1/tau_e)`, and the exposure model `ln X ~ N(mu_x, 1/tau_x)`.
//! The latent true exposures are sampled on the log scale alongside the
//! parameters.

mod chains;
mod model;
mod state;
mod updates;

pub use chains::{
    check_initial, initial_state, run_chain, run_chains, ChainDraws, InitStrategy, McmcConfig, PosteriorSamples,
};
pub use model::{
    Clamp, DataView, ExposureScale, ModelKind, ModelSpec, MuXPrior, NormalPrior, Outcome, PriorSet, SimulationTruth,
    SpreadReading, TauEPrior,
};
pub use state::{AcceptanceRates, ChainState, Proposal, Tuning};
pub use updates::{
    adapt, full_conditional_coeffs_linear, full_conditional_precision, scan, update_error_split,
    update_latent_exposure, update_latent_exposure_without_outcome, update_latents, update_linear_coeffs,
    update_logistic_coeffs, update_mu_x_tau_x, update_ridge_linear_log, update_tau_e, update_tau_eps,
    GaussianConditional, LOGISTIC_COEFF_STEPS,
};
