//! Between/within-chain convergence diagnostic and posterior summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold below which every monitored parameter must fall before a run's
/// summaries are reported.
pub const RHAT_GATE: f64 = 1.1;
pub const MIN_SUMMARY_DRAWS: usize = 100;
const MIN_CHAIN_LEN: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub parameter: String,
    pub mean: f64,
    pub p2_5: f64,
    pub p97_5: f64,
    pub n_retained: usize,
}

impl PosteriorSummary {
    pub fn contains(&self, value: f64) -> bool {
        self.p2_5 <= value && value <= self.p97_5
    }

    pub fn width(&self) -> f64 {
        self.p97_5 - self.p2_5
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhatReport {
    pub parameter: String,
    pub rhat: f64,
    pub chain_means: Vec<f64>,
    pub chain_variances: Vec<f64>,
}

impl RhatReport {
    pub fn passes_gate(&self) -> bool {
        self.rhat < RHAT_GATE
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_var(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Potential scale reduction factor: `sqrt(V / W)` with
/// `V = (n - 1)/n * W + B/n`, `W` the mean within-chain variance and `B/n`
/// the variance of the chain means.
pub fn rhat(name: &str, chains: &[&[f64]]) -> Result<RhatReport> {
    if chains.len() < 2 {
        return Err(Error::domain("chains", format!("need at least 2 chains, got {}", chains.len())));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::domain("chains", "chains must have equal length"));
    }
    if n < MIN_CHAIN_LEN {
        return Err(Error::domain("chains", format!("chains need at least {MIN_CHAIN_LEN} draws, got {n}")));
    }
    let chain_means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let chain_variances: Vec<f64> = chains.iter().zip(&chain_means).map(|(c, &m)| sample_var(c, m)).collect();
    let within = mean(&chain_variances);
    if !(within > 0.0) {
        return Err(Error::DegenerateChain(format!("{name}: zero within-chain variance")));
    }
    let nf = n as f64;
    let grand = mean(&chain_means);
    let between_over_n = sample_var(&chain_means, grand);
    let pooled = (nf - 1.0) / nf * within + between_over_n;
    Ok(RhatReport { parameter: name.to_string(), rhat: (pooled / within).sqrt(), chain_means, chain_variances })
}

/// Type-7 quantile (linear interpolation between order statistics) of a
/// sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and equal-tailed 95% interval of pooled draws.
pub fn summarize(name: &str, draws: &[f64]) -> Result<PosteriorSummary> {
    if draws.len() < MIN_SUMMARY_DRAWS {
        return Err(Error::InsufficientSamples { needed: MIN_SUMMARY_DRAWS, got: draws.len() });
    }
    if draws.iter().any(|x| x.is_nan()) {
        return Err(Error::Numerical(format!("{name}: NaN among draws")));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(PosteriorSummary {
        parameter: name.to_string(),
        mean: mean(draws),
        p2_5: quantile_sorted(&sorted, 0.025),
        p97_5: quantile_sorted(&sorted, 0.975),
        n_retained: draws.len(),
    })
}

/// Summary of `map(draw)`; the mean is taken after the transform.
pub fn transform_summary(name: &str, draws: &[f64], map: impl Fn(f64) -> f64) -> Result<PosteriorSummary> {
    let mapped: Vec<f64> = draws.iter().map(|&x| map(x)).collect();
    summarize(name, &mapped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn normals(rng: &mut Rng, n: usize, mean: f64) -> Vec<f64> {
        (0..n).map(|_| mean + rng.std_normal()).collect()
    }

    #[test]
    fn rhat_same_distribution() {
        let mut rng = Rng::new(1);
        let a = normals(&mut rng, 2000, 0.0);
        let b = normals(&mut rng, 2000, 0.0);
        let r = rhat("x", &[&a, &b]).unwrap().rhat;
        assert!((0.99..=1.05).contains(&r), "{r}");
    }

    #[test]
    fn rhat_iid_three_chains() {
        let mut rng = Rng::new(2);
        let chains: Vec<Vec<f64>> = (0..3).map(|_| normals(&mut rng, 10_000, 0.0)).collect();
        let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
        assert!(rhat("x", &refs).unwrap().rhat < 1.01);
    }

    #[test]
    fn rhat_separated_chains() {
        let mut rng = Rng::new(3);
        let a = normals(&mut rng, 1000, 0.0);
        let b = normals(&mut rng, 1000, 5.0);
        let report = rhat("x", &[&a, &b]).unwrap();
        assert!(report.rhat > 3.0);
        assert!(!report.passes_gate());
    }

    #[test]
    fn rhat_errors() {
        let a = vec![1.0; 20];
        assert!(matches!(rhat("x", &[&a, &a]), Err(Error::DegenerateChain(_))));
        let b: Vec<f64> = (0..20).map(f64::from).collect();
        assert!(rhat("x", &[&b]).is_err());
        assert!(rhat("x", &[&b[..5], &b[5..10]]).is_err());
        assert!(rhat("x", &[&b[..12], &b[..15]]).is_err());
    }

    proptest! {
        #[test]
        fn rhat_affine_invariant(seed in 0u64..1000, a in 0.1f64..10.0, neg in any::<bool>(), b in -100.0f64..100.0) {
            let a = if neg { -a } else { a };
            let mut rng = Rng::new(seed);
            let c1 = normals(&mut rng, 50, 0.0);
            let c2 = normals(&mut rng, 50, 0.3);
            let t1: Vec<f64> = c1.iter().map(|x| a * x + b).collect();
            let t2: Vec<f64> = c2.iter().map(|x| a * x + b).collect();
            let r0 = rhat("x", &[&c1, &c2]).unwrap().rhat;
            let r1 = rhat("x", &[&t1, &t2]).unwrap().rhat;
            prop_assert!((r0 - r1).abs() < 1e-9);
        }

        #[test]
        fn percentiles_equivariant_under_exp(seed in 0u64..1000) {
            let mut rng = Rng::new(seed);
            // (n - 1) * 0.025 is an integer, so both percentiles are order
            // statistics and map exactly.
            let xs = normals(&mut rng, 401, 0.0);
            let s = summarize("a", &xs).unwrap();
            let t = transform_summary("or", &xs, f64::exp).unwrap();
            prop_assert!((t.p2_5 - s.p2_5.exp()).abs() < 1e-12);
            prop_assert!((t.p97_5 - s.p97_5.exp()).abs() < 1e-12);
            // Jensen: mean of exp exceeds exp of mean.
            prop_assert!(t.mean >= s.mean.exp());
        }
    }

    #[test]
    fn uniform_grid_percentiles() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64 / 1000.0).collect();
        let s = summarize("u", &xs).unwrap();
        assert!((s.p2_5 - 0.025).abs() <= 0.001);
        assert!((s.p97_5 - 0.975).abs() <= 0.001);
        assert_eq!(s.n_retained, 1000);
    }

    #[test]
    fn constant_samples() {
        let xs = vec![2.5; 200];
        let s = summarize("c", &xs).unwrap();
        assert_eq!((s.mean, s.p2_5, s.p97_5), (2.5, 2.5, 2.5));
        let t = transform_summary("or", &[0.0; 150], f64::exp).unwrap();
        assert_eq!((t.mean, t.p2_5, t.p97_5), (1.0, 1.0, 1.0));
    }

    #[test]
    fn normal_quantile() {
        let mut rng = Rng::new(4);
        let xs = normals(&mut rng, 100_000, 0.0);
        let s = summarize("n", &xs).unwrap();
        assert!((s.p2_5 + 1.96).abs() < 0.02);
        assert!((s.p97_5 - 1.96).abs() < 0.02);
    }

    #[test]
    fn too_few_draws() {
        assert!(matches!(summarize("x", &[1.0; 99]), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn type7_matches_known_values() {
        // R: quantile(c(1, 2, 3, 4), c(0.025, 0.975), type = 7) = 1.075, 3.925
        let s = [1.0, 2.0, 3.0, 4.0];
        assert!((quantile_sorted(&s, 0.025) - 1.075).abs() < 1e-12);
        assert!((quantile_sorted(&s, 0.975) - 3.925).abs() < 1e-12);
    }
}
