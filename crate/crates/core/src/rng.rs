//! Seedable random streams and the samplers the simulation and the MCMC
//! engine need.
//!
//! Every [`Rng`] is a ChaCha8 generator keyed by a master seed. Independent
//! streams are derived from `(seed, domain, index)`: the domain tag selects
//! the key and the index selects the ChaCha stream, so chain `c` of a run and
//! subject `i` of a cohort never share state and can be generated in any
//! order.

use rand::Rng as _;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stream domains. Keeping them distinct guarantees that, for example,
/// subject 0 of a cohort and chain 0 of a sampler draw unrelated numbers.
pub mod domain {
    pub const GENERIC: u64 = 0;
    pub const COHORT: u64 = 0x636f_686f_7274;
    pub const CHAIN: u64 = 0x6368_6169_6e73;
    pub const EVIDENCE: u64 = 0x6576_6964;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::stream(seed, domain::GENERIC, 0)
    }

    /// Independent stream `index` within `domain` of the master `seed`.
    pub fn stream(seed: u64, domain: u64, index: u64) -> Self {
        let mut key = [0u8; 32];
        let mut state = seed ^ splitmix64(domain);
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(index);
        Rng { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on `(0, 1]`, safe to take the log of.
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    #[inline]
    pub fn std_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Standard gamma draw (unit scale) for an already validated shape.
    pub(crate) fn std_gamma(&mut self, shape: f64) -> f64 {
        if shape < 1.0 {
            // G(k) = G(k + 1) * U^(1/k), combined on the log scale so tiny
            // shapes do not underflow the intermediate power.
            loop {
                let boosted = self.marsaglia_tsang(shape + 1.0);
                let log_draw = boosted.ln() + self.uniform_open0().ln() / shape;
                let draw = log_draw.exp();
                if draw > 0.0 {
                    return draw;
                }
            }
        }
        self.marsaglia_tsang(shape)
    }

    fn marsaglia_tsang(&mut self, shape: f64) -> f64 {
        debug_assert!(shape >= 1.0);
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let (x, v) = loop {
                let x = self.std_normal();
                let v = 1.0 + c * x;
                if v > 0.0 {
                    break (x, v * v * v);
                }
            };
            let u = self.uniform_open0();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return d * v;
            }
            if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }
}

/// Gamma law in shape–scale form: mean `shape * scale`, variance
/// `shape * scale^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub shape: f64,
    pub scale: f64,
}

impl GammaParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        let params = GammaParams { shape, scale };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shape > 0.0 && self.shape.is_finite()) {
            return Err(Error::domain("shape", format!("must be positive and finite, got {}", self.shape)));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::domain("scale", format!("must be positive and finite, got {}", self.scale)));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }

    /// Log density up to the normalizing constant, `-inf` outside the support.
    pub fn log_kernel(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        (self.shape - 1.0) * x.ln() - x / self.scale
    }
}

/// Lognormal law parameterized by the mean and precision of the log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogNormalParams {
    pub mu: f64,
    pub tau: f64,
}

impl LogNormalParams {
    pub fn new(mu: f64, tau: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::domain("mu", "must be finite"));
        }
        check_precision("tau", tau)?;
        Ok(LogNormalParams { mu, tau })
    }
}

pub(crate) fn check_precision(name: &'static str, precision: f64) -> Result<()> {
    if precision > 0.0 && !precision.is_nan() {
        Ok(())
    } else {
        Err(Error::domain(name, format!("precision must be positive, got {precision}")))
    }
}

/// Normal draw with the given mean and precision (inverse variance).
pub fn sample_normal(rng: &mut Rng, mean: f64, precision: f64) -> Result<f64> {
    check_precision("precision", precision)?;
    Ok(mean + rng.std_normal() / precision.sqrt())
}

pub fn sample_lognormal(rng: &mut Rng, params: LogNormalParams) -> Result<f64> {
    check_precision("tau", params.tau)?;
    Ok((params.mu + rng.std_normal() / params.tau.sqrt()).exp())
}

pub fn sample_gamma(rng: &mut Rng, params: GammaParams) -> Result<f64> {
    params.validate()?;
    Ok(rng.std_gamma(params.shape) * params.scale)
}

pub fn sample_bernoulli(rng: &mut Rng, p: f64) -> Result<u8> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain("p", format!("must lie in [0, 1], got {p}")));
    }
    Ok(u8::from(rng.uniform() < p))
}
