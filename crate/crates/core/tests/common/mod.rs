#![allow(dead_code)]

use measerr::adjust::{ChainState, Tuning};
use measerr::rng::Rng;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the mean of an autocorrelated series by
/// non-overlapping batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = xs.chunks_exact(size).map(mean).collect();
    (variance(&means) / means.len() as f64).sqrt()
}

/// A bare chain state for driving individual update blocks.
pub fn state(latent: Vec<f64>, seed: u64) -> ChainState {
    ChainState {
        intercept: 0.0,
        slope: 0.0,
        tau_eps: Some(1.0),
        mu_x: 0.0,
        tau_x: 1.0,
        tau_e: 1.0,
        latent,
        rng: Rng::new(seed),
        iteration: 0,
        tuning: Tuning::default(),
    }
}

pub mod geweke;
