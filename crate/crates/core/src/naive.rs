//! Frequentist fits that ignore measurement error, and the classical
//! reliability corrections applied to their output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const Z_95: f64 = 1.96;
const IRLS_MAX_ITER: usize = 100;
const SCORE_TOL: f64 = 1e-8;
const NEWTON_REGION: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub intercept: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    fn new(intercept: f64, slope: f64, slope_se: f64, converged: bool, iterations: usize) -> Self {
        FitResult {
            intercept,
            slope,
            slope_se,
            ci95_lo: slope - Z_95 * slope_se,
            ci95_hi: slope + Z_95 * slope_se,
            converged,
            iterations,
        }
    }

    pub fn ci_contains(&self, value: f64) -> bool {
        self.ci95_lo <= value && value <= self.ci95_hi
    }

    /// Odds ratio and its interval, for a logistic fit.
    pub fn odds_ratio(&self) -> (f64, f64, f64) {
        (self.slope.exp(), self.ci95_lo.exp(), self.ci95_hi.exp())
    }
}

/// Ordinary least squares of `y` on `w` with the classical slope standard
/// error.
pub fn fit_linear(w: &[f64], y: &[f64]) -> Result<FitResult> {
    if w.len() != y.len() {
        return Err(Error::domain("y", format!("length {} differs from w length {}", y.len(), w.len())));
    }
    let n = w.len();
    if n < 3 {
        return Err(Error::domain("w", format!("need at least 3 observations, got {n}")));
    }
    let nf = n as f64;
    let w_bar = w.iter().sum::<f64>() / nf;
    let y_bar = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&wi, &yi) in w.iter().zip(y) {
        let dw = wi - w_bar;
        sxx += dw * dw;
        sxy += dw * (yi - y_bar);
    }
    let sum_sq: f64 = w.iter().map(|x| x * x).sum();
    if !(sxx > 1e-14 * sum_sq) {
        return Err(Error::SingularDesign("predictor has zero variance".into()));
    }
    let slope = sxy / sxx;
    let intercept = y_bar - slope * w_bar;
    let rss: f64 = w.iter().zip(y).map(|(&wi, &yi)| (yi - intercept - slope * wi).powi(2)).sum();
    let sigma2 = (rss / (nf - 2.0)).max(0.0);
    let se = (sigma2 / sxx).sqrt();
    Ok(FitResult::new(intercept, slope, se, true, 0))
}

/// Bernoulli log-likelihood of a logistic model, computed without
/// overflow for any linear predictor.
pub fn logistic_loglik(w: &[f64], z: &[u8], intercept: f64, slope: f64) -> f64 {
    w.iter()
        .zip(z)
        .map(|(&wi, &zi)| {
            let eta = intercept + slope * wi;
            f64::from(zi) * eta - log1p_exp(eta)
        })
        .sum()
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

struct Newton {
    score: [f64; 2],
    info: [f64; 3],
}

fn newton_terms(w: &[f64], z: &[u8], b0: f64, b1: f64) -> Newton {
    let (mut s0, mut s1, mut i00, mut i01, mut i11) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&wi, &zi) in w.iter().zip(z) {
        let p = expit(b0 + b1 * wi);
        let r = f64::from(zi) - p;
        let v = p * (1.0 - p);
        s0 += r;
        s1 += r * wi;
        i00 += v;
        i01 += v * wi;
        i11 += v * wi * wi;
    }
    Newton { score: [s0, s1], info: [i00, i01, i11] }
}

/// Maximum-likelihood logistic regression of `z` on `w` by Newton–Raphson
/// (IRLS) with step halving. The slope is on the log-odds scale and its
/// standard error comes from the inverse observed information.
pub fn fit_logistic(w: &[f64], z: &[u8]) -> Result<FitResult> {
    if w.len() != z.len() {
        return Err(Error::domain("z", format!("length {} differs from w length {}", z.len(), w.len())));
    }
    if z.iter().any(|&v| v > 1) {
        return Err(Error::domain("z", "outcome must be 0 or 1"));
    }
    let cases = z.iter().filter(|&&v| v == 1).count();
    if cases == 0 || cases == z.len() {
        return Err(Error::domain("z", "both outcome classes must be present"));
    }
    check_separation(w, z)?;

    let p_bar = cases as f64 / z.len() as f64;
    let mut beta = [(p_bar / (1.0 - p_bar)).ln(), 0.0];
    let mut ll = logistic_loglik(w, z, beta[0], beta[1]);
    for iter in 1..=IRLS_MAX_ITER {
        let Newton { score, info } = newton_terms(w, z, beta[0], beta[1]);
        let det = info[0] * info[2] - info[1] * info[1];
        if !(det > 0.0) {
            return Err(Error::SingularDesign("information matrix is not positive definite".into()));
        }
        let step = [(info[2] * score[0] - info[1] * score[1]) / det, (info[0] * score[1] - info[1] * score[0]) / det];
        if score[0].hypot(score[1]) < SCORE_TOL {
            return Ok(finish(beta, info, iter - 1));
        }
        // The squared Newton decrement bounds the remaining log-likelihood
        // gain and does not depend on the scale of the predictor.
        let decrement = score[0] * step[0] + score[1] * step[1];
        if decrement < NEWTON_REGION {
            // Close to the optimum the log-likelihood gain is below its own
            // rounding error, so a line search would stall; take the full step.
            beta = [beta[0] + step[0], beta[1] + step[1]];
            ll = logistic_loglik(w, z, beta[0], beta[1]);
            continue;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let cand = [beta[0] + t * step[0], beta[1] + t * step[1]];
            let cand_ll = logistic_loglik(w, z, cand[0], cand[1]);
            if cand_ll >= ll {
                beta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No ascent left in floating point: accept if the score is
            // already at rounding level for this sample size.
            let terms = newton_terms(w, z, beta[0], beta[1]);
            let norm = terms.score[0].hypot(terms.score[1]);
            let scale: f64 = w.iter().map(|x| x.abs()).sum::<f64>() + w.len() as f64;
            if norm < 1e3 * f64::EPSILON * scale {
                return Ok(finish(beta, terms.info, iter));
            }
            return Err(Error::NonConvergence {
                iterations: iter,
                diagnostic: format!("line search failed with score norm {norm:e}"),
            });
        }
    }
    let terms = newton_terms(w, z, beta[0], beta[1]);
    Err(Error::NonConvergence {
        iterations: IRLS_MAX_ITER,
        diagnostic: format!(
            "score norm {:e} after iteration cap (estimate {:?})",
            terms.score[0].hypot(terms.score[1]),
            beta
        ),
    })
}

fn finish(beta: [f64; 2], info: [f64; 3], iterations: usize) -> FitResult {
    let det = info[0] * info[2] - info[1] * info[1];
    let var_slope = info[0] / det;
    FitResult::new(beta[0], beta[1], var_slope.sqrt(), true, iterations)
}

/// Complete separation on a single predictor: every case lies strictly on
/// one side of every non-case.
fn check_separation(w: &[f64], z: &[u8]) -> Result<()> {
    let (mut min1, mut max1, mut min0, mut max0) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (&wi, &zi) in w.iter().zip(z) {
        if zi == 1 {
            min1 = min1.min(wi);
            max1 = max1.max(wi);
        } else {
            min0 = min0.min(wi);
            max0 = max0.max(wi);
        }
    }
    if max0 < min1 || max1 < min0 {
        return Err(Error::NonConvergence {
            iterations: 0,
            diagnostic: "complete separation: the MLE does not exist".into(),
        });
    }
    Ok(())
}

fn check_reliability(rho: f64) -> Result<()> {
    if rho > 0.0 && rho <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain("rho", format!("reliability must lie in (0, 1], got {rho}")))
    }
}

/// Slope corrected for attenuation: `slope_obs / rho`.
pub fn correct_slope_reliability(slope_obs: f64, rho: f64) -> Result<f64> {
    check_reliability(rho)?;
    Ok(slope_obs / rho)
}

/// Reading of the relative-risk reliability correction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RrCorrection {
    /// `RR_obs^(1/rho)`: the log relative risk is de-attenuated like a slope.
    #[default]
    InverseExponent,
    /// `RR_obs * sqrt(rho)`, the formula read as a literal product.
    LiteralMultiplier,
}

pub fn correct_rr_reliability(rr_obs: f64, rho: f64) -> Result<f64> {
    correct_rr_reliability_with(rr_obs, rho, RrCorrection::default())
}

pub fn correct_rr_reliability_with(rr_obs: f64, rho: f64, form: RrCorrection) -> Result<f64> {
    if !(rr_obs > 0.0 && rr_obs.is_finite()) {
        return Err(Error::domain("rr_obs", format!("relative risk must be positive, got {rr_obs}")));
    }
    check_reliability(rho)?;
    Ok(match form {
        RrCorrection::InverseExponent => rr_obs.powf(1.0 / rho),
        RrCorrection::LiteralMultiplier => rr_obs * rho.sqrt(),
    })
}
