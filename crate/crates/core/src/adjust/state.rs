use serde::{Deserialize, Serialize};

use crate::rng::Rng;

/// Random-walk proposal whose log step size is nudged toward a target
/// acceptance rate, one batch at a time, while adaptation is enabled.
#[derive(Clone, Debug, PartialEq)]
pub struct Proposal {
    pub log_scale: f64,
    pub target: f64,
    batch_accepted: u64,
    batch_proposed: u64,
    batches: u32,
    pub accepted: u64,
    pub proposed: u64,
}

impl Proposal {
    pub fn new(scale: f64, target: f64) -> Self {
        Proposal {
            log_scale: scale.ln(),
            target,
            batch_accepted: 0,
            batch_proposed: 0,
            batches: 0,
            accepted: 0,
            proposed: 0,
        }
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    #[inline]
    pub fn record(&mut self, accepted: bool) {
        self.batch_proposed += 1;
        self.proposed += 1;
        if accepted {
            self.batch_accepted += 1;
            self.accepted += 1;
        }
    }

    pub fn adapt(&mut self) {
        if self.batch_proposed == 0 {
            return;
        }
        self.batches += 1;
        let rate = self.batch_accepted as f64 / self.batch_proposed as f64;
        let step = (1.0 / f64::from(self.batches).sqrt()).max(0.1);
        self.log_scale += step * (rate - self.target);
        self.batch_accepted = 0;
        self.batch_proposed = 0;
    }

    /// Clears the counters so later rates describe the frozen kernel only.
    pub fn reset_counts(&mut self) {
        self.batch_accepted = 0;
        self.batch_proposed = 0;
        self.accepted = 0;
        self.proposed = 0;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tuning {
    /// Shared step for every latent log exposure, in units of the prior
    /// conditional standard deviation `1/sqrt(tau_e + tau_x)`.
    pub latent: Proposal,
    /// Step on `ln(mu_x)` when `mu_x` has a lognormal prior.
    pub mu_x: Proposal,
    /// Joint step for the logistic coefficients.
    pub coeffs: Proposal,
    /// Step on the logit of the error share of the log-scale variance.
    pub split: Proposal,
    /// Step on `ln(tau_x)` along the likelihood-flat ridge of the linear
    /// model on `log X`.
    pub ridge: Proposal,
}

impl Default for Tuning {
    fn default() -> Self {
        Tuning {
            latent: Proposal::new(2.4, 0.44),
            mu_x: Proposal::new(1.0, 0.44),
            coeffs: Proposal::new(2.38 / 2f64.sqrt(), 0.234),
            split: Proposal::new(0.5, 0.44),
            ridge: Proposal::new(1.0, 0.44),
        }
    }
}

impl Tuning {
    pub fn reset_counts(&mut self) {
        self.latent.reset_counts();
        self.mu_x.reset_counts();
        self.coeffs.reset_counts();
        self.split.reset_counts();
        self.ridge.reset_counts();
    }
}

/// Acceptance rates of the Metropolis blocks over the retained phase.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub latent: Option<f64>,
    pub mu_x: Option<f64>,
    pub coeffs: Option<f64>,
    pub split: Option<f64>,
    pub ridge: Option<f64>,
}

/// Full state of one chain.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub intercept: f64,
    pub slope: f64,
    /// Residual precision of the continuous outcome (`None` for logistic).
    pub tau_eps: Option<f64>,
    pub mu_x: f64,
    pub tau_x: f64,
    pub tau_e: f64,
    /// Latent log true exposures `l_i = ln X_i`.
    pub latent: Vec<f64>,
    pub rng: Rng,
    pub iteration: usize,
    pub tuning: Tuning,
}

impl ChainState {
    pub fn acceptance(&self) -> AcceptanceRates {
        let rate = |p: &Proposal| (p.proposed > 0).then(|| p.acceptance_rate());
        AcceptanceRates {
            latent: rate(&self.tuning.latent),
            mu_x: rate(&self.tuning.mu_x),
            coeffs: rate(&self.tuning.coeffs),
            split: rate(&self.tuning.split),
            ridge: rate(&self.tuning.ridge),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adaptation_moves_toward_target() {
        let mut p = Proposal::new(1.0, 0.44);
        for _ in 0..100 {
            p.record(true);
        }
        p.adapt();
        assert!(p.scale() > 1.0);
        for _ in 0..100 {
            p.record(false);
        }
        let before = p.scale();
        p.adapt();
        assert!(p.scale() < before);
        p.reset_counts();
        assert!(p.acceptance_rate().is_nan());
    }
}
