//! Evidence ratio between "no association" and "positive association" on a
//! one-slope toy model `u = b * v + noise` with known noise precision.
//!
//! Under the null `b = 0`; under the alternative `b > 0` with a half-normal
//! prior of scale `sigma_b`. The ratio
//! `Δ = p(data | b = 0) p(b = 0) / (p(data | b > 0) p(b > 0))`
//! exceeds one when the data and prior masses favour the null.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{check_precision, domain, Rng};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyData {
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub noise_precision: f64,
}

impl ToyData {
    pub fn new(v: Vec<f64>, u: Vec<f64>, noise_precision: f64) -> Result<Self> {
        let data = ToyData { v, u, noise_precision };
        data.validate()?;
        Ok(data)
    }

    /// Null data: `v ~ N(0, 1)`, `u ~ N(0, 1/noise_precision)`.
    pub fn simulate_null(n: usize, noise_precision: f64, seed: u64) -> Result<Self> {
        check_precision("noise_precision", noise_precision)?;
        let mut rng = Rng::stream(seed, domain::EVIDENCE, 0);
        let sd = 1.0 / noise_precision.sqrt();
        let (mut v, mut u) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            v.push(rng.std_normal());
            u.push(sd * rng.std_normal());
        }
        ToyData::new(v, u, noise_precision)
    }

    pub fn validate(&self) -> Result<()> {
        if self.v.len() != self.u.len() {
            return Err(Error::domain("u", "length differs from v"));
        }
        if self.v.is_empty() {
            return Err(Error::domain("v", "need at least one observation"));
        }
        if self.v.iter().chain(&self.u).any(|x| !x.is_finite()) {
            return Err(Error::domain("u", "data must be finite"));
        }
        check_precision("noise_precision", self.noise_precision)
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn prefix(&self, n: usize) -> Result<ToyData> {
        let n = n.min(self.len());
        ToyData::new(self.v[..n].to_vec(), self.u[..n].to_vec(), self.noise_precision)
    }

    fn sufficient(&self) -> (f64, f64) {
        let suv = self.u.iter().zip(&self.v).map(|(u, v)| u * v).sum();
        let svv = self.v.iter().map(|v| v * v).sum();
        (suv, svv)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisPriors {
    pub p_null: f64,
    /// Scale of the half-normal prior on `b > 0`.
    pub sigma_b: f64,
}

impl HypothesisPriors {
    pub fn new(p_null: f64, sigma_b: f64) -> Result<Self> {
        let p = HypothesisPriors { p_null, sigma_b };
        p.validate()?;
        Ok(p)
    }

    pub fn p_pos(&self) -> f64 {
        1.0 - self.p_null
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_null > 0.0 && self.p_null < 1.0) {
            return Err(Error::domain("p_null", format!("must lie strictly between 0 and 1, got {}", self.p_null)));
        }
        if !(self.sigma_b > 0.0 && self.sigma_b.is_finite()) {
            return Err(Error::domain("sigma_b", format!("must be positive, got {}", self.sigma_b)));
        }
        Ok(())
    }
}

/// `ln p(data | b = 0)`.
pub fn marginal_likelihood_null(data: &ToyData) -> Result<f64> {
    data.validate()?;
    let lambda = data.noise_precision;
    let n = data.len() as f64;
    let ss: f64 = data.u.iter().map(|u| u * u).sum();
    Ok(0.5 * n * (lambda.ln() - LN_2PI) - 0.5 * lambda * ss)
}

/// `ln p(data | b > 0)` under the half-normal prior, by adaptive
/// Gauss–Kronrod quadrature on `t` with `b = sigma_b * tan(pi t / 2)`.
pub fn marginal_likelihood_positive(data: &ToyData, prior: &HypothesisPriors) -> Result<f64> {
    prior.validate()?;
    let null = marginal_likelihood_null(data)?;
    let (suv, svv) = data.sufficient();
    if suv == 0.0 && svv == 0.0 {
        // The likelihood does not depend on b.
        return Ok(null);
    }
    let lambda = data.noise_precision;
    let sigma = prior.sigma_b;
    // ln integrand relative to the null likelihood, as a function of b:
    // lambda b suv - lambda b^2 svv / 2 + ln(half-normal density).
    let curvature = lambda * svv + 1.0 / (sigma * sigma);
    let log_hn_const = std::f64::consts::LN_2 - sigma.ln() - 0.5 * LN_2PI;
    let log_g = |b: f64| lambda * b * suv - 0.5 * b * b * curvature + log_hn_const;

    let mode = (lambda * suv / curvature).max(0.0);
    let sd = 1.0 / curvature.sqrt();
    let peak = log_g(mode);

    let to_t = |b: f64| (2.0 / std::f64::consts::PI) * (b / sigma).atan();
    let integrand = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let half = 0.5 * std::f64::consts::PI * t;
        let b = sigma * half.tan();
        let jac = sigma * 0.5 * std::f64::consts::PI / half.cos().powi(2);
        let v = (log_g(b) - peak).exp() * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };

    let mut breaks = vec![0.0, 1.0];
    for k in [-12.0, -6.0, -3.0, -1.5, 0.0, 1.5, 3.0, 6.0, 12.0, 24.0] {
        let b = mode + k * sd;
        if b > 0.0 {
            breaks.push(to_t(b));
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    // Scale of the answer (Laplace-type), used for the absolute tolerance.
    let scale = sd * (2.0 * std::f64::consts::PI).sqrt() * 0.5;
    let tol = 1e-12 * scale;
    let mut total = 0.0;
    for w in breaks.windows(2) {
        total += adaptive_gk15(&integrand, w[0], w[1], tol, 0)?;
    }
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Numerical(format!("quadrature returned {total} (mode {mode}, sd {sd}, peak {peak})")));
    }
    Ok(null + peak + total.ln())
}

const GK15_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_2,
    0.063_092_092_629_979_0,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G7_WEIGHTS: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];
const MAX_DEPTH: usize = 50;

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK15_WEIGHTS[7] * fc;
    let mut gauss = G7_WEIGHTS[3] * fc;
    for i in 0..7 {
        let x = h * GK15_NODES[i];
        let s = f(c - x) + f(c + x);
        kronrod += GK15_WEIGHTS[i] * s;
        if i % 2 == 1 {
            gauss += G7_WEIGHTS[i / 2] * s;
        }
    }
    (kronrod * h, (kronrod - gauss).abs() * h)
}

fn adaptive_gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> Result<f64> {
    let (value, err) = gk15(f, a, b);
    if err <= tol.max(1e-15 * value.abs()) {
        return Ok(value);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Numerical(format!(
            "quadrature did not converge on [{a}, {b}]: estimate {value:e}, error {err:e}"
        )));
    }
    let m = 0.5 * (a + b);
    Ok(adaptive_gk15(f, a, m, 0.5 * tol, depth + 1)? + adaptive_gk15(f, m, b, 0.5 * tol, depth + 1)?)
}

/// Δ for the given data and hypothesis priors.
pub fn delta(data: &ToyData, prior: &HypothesisPriors) -> Result<f64> {
    Ok(log_delta(data, prior)?.exp())
}

pub fn log_delta(data: &ToyData, prior: &HypothesisPriors) -> Result<f64> {
    let null = marginal_likelihood_null(data)?;
    let pos = marginal_likelihood_positive(data, prior)?;
    Ok((null - pos) + (prior.p_null.ln() - prior.p_pos().ln()))
}

/// One row of a Δ table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub n: usize,
    pub p_null: f64,
    pub sigma_b: f64,
    pub log_marginal_null: f64,
    pub log_marginal_positive: f64,
    pub delta: f64,
}

/// Δ on nested prefixes of `data` for each `n`, and at the full length for
/// each `p_null`.
pub fn delta_table(data: &ToyData, sigma_b: f64, ns: &[usize], p_nulls: &[f64]) -> Result<Vec<DeltaRow>> {
    let mut rows = Vec::new();
    let mut row = |d: &ToyData, p_null: f64| -> Result<()> {
        let prior = HypothesisPriors::new(p_null, sigma_b)?;
        let null = marginal_likelihood_null(d)?;
        let pos = marginal_likelihood_positive(d, &prior)?;
        rows.push(DeltaRow {
            n: d.len(),
            p_null,
            sigma_b,
            log_marginal_null: null,
            log_marginal_positive: pos,
            delta: ((null - pos) + (p_null.ln() - prior.p_pos().ln())).exp(),
        });
        Ok(())
    };
    for &n in ns {
        row(&data.prefix(n)?, 0.5)?;
    }
    for &p in p_nulls {
        row(data, p)?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed_twenty() -> ToyData {
        ToyData::simulate_null(20, 1.0, 99).unwrap()
    }

    #[test]
    fn null_single_point() {
        let d = ToyData::new(vec![1.0], vec![0.0], 1.0).unwrap();
        let v = marginal_likelihood_null(&d).unwrap();
        assert!((v + 0.918_938_533_204_672_7).abs() < 1e-15);
    }

    #[test]
    fn null_matches_termwise_sum() {
        let d = ToyData::simulate_null(37, 2.5, 4).unwrap();
        let direct: f64 =
            d.u.iter().map(|u| 0.5 * (2.5f64 / (2.0 * std::f64::consts::PI)).ln() - 0.5 * 2.5 * u * u).sum();
        assert!((marginal_likelihood_null(&d).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn null_decreases_when_u_scaled() {
        let d = fixed_twenty();
        let scaled = ToyData::new(d.v.clone(), d.u.iter().map(|u| 10.0 * u).collect(), 1.0).unwrap();
        assert!(marginal_likelihood_null(&scaled).unwrap() < marginal_likelihood_null(&d).unwrap());
    }

    #[test]
    fn zero_predictor_collapses_to_null() {
        let d = ToyData::new(vec![0.0; 5], vec![0.3, -0.2, 1.0, 0.5, -1.1], 1.0).unwrap();
        let prior = HypothesisPriors::new(0.5, 1.0).unwrap();
        assert_eq!(marginal_likelihood_positive(&d, &prior).unwrap(), marginal_likelihood_null(&d).unwrap());
        assert_eq!(delta(&d, &prior).unwrap(), 1.0);
        let prior = HypothesisPriors::new(0.8, 1.0).unwrap();
        assert!((delta(&d, &prior).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_prior_scale_collapses_to_null() {
        let d = fixed_twenty();
        let prior = HypothesisPriors::new(0.5, 1e-8).unwrap();
        let pos = marginal_likelihood_positive(&d, &prior).unwrap();
        assert!((pos - marginal_likelihood_null(&d).unwrap()).abs() < 1e-6);
    }

    /// Brute-force oracle: composite Simpson on b in [0, 40 sigma] with a
    /// very fine grid.
    fn simpson_log_positive(d: &ToyData, sigma: f64) -> f64 {
        let null = marginal_likelihood_null(d).unwrap();
        let (suv, svv) = d.sufficient();
        let lam = d.noise_precision;
        let f = |b: f64| {
            (lam * b * suv - 0.5 * lam * b * b * svv - 0.5 * b * b / (sigma * sigma)).exp() * 2.0
                / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        };
        let m = 2_000_000;
        let hi = 40.0 * sigma;
        let h = hi / m as f64;
        let mut s = f(0.0) + f(hi);
        for i in 1..m {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        null + (s * h / 3.0).ln()
    }

    #[test]
    fn quadrature_matches_simpson() {
        for (n, seed, sigma) in [(20, 1, 1.0), (200, 2, 0.5), (1000, 3, 2.0)] {
            let d = ToyData::simulate_null(n, 1.0, seed).unwrap();
            let prior = HypothesisPriors::new(0.5, sigma).unwrap();
            let q = marginal_likelihood_positive(&d, &prior).unwrap();
            let s = simpson_log_positive(&d, sigma);
            assert!((q - s).abs() < 1e-8, "n={n}: {q} vs {s}");
        }
    }

    #[test]
    fn delta_increasing_in_p_null() {
        let d = fixed_twenty();
        let mut last = 0.0;
        for p in [0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99] {
            let v = delta(&d, &HypothesisPriors::new(p, 1.0).unwrap()).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn invalid_priors() {
        assert!(HypothesisPriors::new(0.0, 1.0).is_err());
        assert!(HypothesisPriors::new(1.0, 1.0).is_err());
        assert!(HypothesisPriors::new(0.5, 0.0).is_err());
        assert!(ToyData::new(vec![], vec![], 1.0).is_err());
        assert!(ToyData::new(vec![1.0], vec![1.0, 2.0], 1.0).is_err());
    }
}
