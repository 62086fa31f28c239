//! Successive-conditional joint-distribution test. Alternately drawing the
//! data given the parameters and the parameters given the data (one sampler
//! scan) leaves the joint prior-predictive law invariant only if every block
//! of the scan targets the right conditional, so the retained parameters
//! must reproduce their prior moments.

use super::{batch_means_se, mean, state};
use measerr::adjust::{
    scan, ChainState, DataView, ExposureScale, ModelKind, ModelSpec, MuXPrior, NormalPrior, Outcome, PriorSet,
};
use measerr::rng::{sample_bernoulli, sample_gamma, sample_normal, GammaParams, Rng};

#[derive(Clone, Debug)]
pub struct GewekeCheck {
    pub name: String,
    pub mean: f64,
    pub expected: f64,
    pub z: f64,
}

const N: usize = 50;
pub const ROUNDS: usize = 10_000;
const BATCHES: usize = 50;

/// A function of the chain state whose prior mean is known.
type Statistic = Box<dyn Fn(&ChainState) -> f64>;

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn priors(kind: ModelKind) -> PriorSet {
    match kind {
        ModelKind::Linear => PriorSet {
            intercept: NormalPrior::new(0.0, 1.0),
            slope: NormalPrior::new(0.0, 0.25),
            mu_x: MuXPrior::LogNormal { log_mean: -1.0, log_variance: 0.25 },
            tau_x: GammaParams { shape: 4.0, scale: 0.5 },
            tau_eps: Some(GammaParams { shape: 4.0, scale: 0.25 }),
            tau_e: GammaParams { shape: 4.0, scale: 0.5 },
        },
        ModelKind::Logistic => PriorSet {
            intercept: NormalPrior::new(-0.5, 1.0),
            slope: NormalPrior::new(0.3, 0.25),
            mu_x: MuXPrior::Normal(NormalPrior::new(0.0, 0.25)),
            tau_x: GammaParams { shape: 4.0, scale: 0.5 },
            tau_eps: None,
            tau_e: GammaParams { shape: 4.0, scale: 0.5 },
        },
    }
}

fn mu_x_moments(prior: MuXPrior) -> (f64, f64) {
    match prior {
        MuXPrior::Normal(p) => (p.mean, p.variance),
        MuXPrior::LogNormal { log_mean, log_variance } => {
            let m = (log_mean + 0.5 * log_variance).exp();
            (m, m * m * (log_variance.exp() - 1.0))
        }
    }
}

/// Fresh data given the current parameters and latent exposures.
fn simulate_data(s: &ChainState, kind: ModelKind, scale: ExposureScale, rng: &mut Rng) -> DataView {
    let log_w = s.latent.iter().map(|&l| sample_normal(rng, l, s.tau_e).unwrap()).collect();
    let outcome = match kind {
        ModelKind::Linear => Outcome::Continuous(
            s.latent
                .iter()
                .map(|&l| sample_normal(rng, s.intercept + s.slope * scale.covariate(l), s.tau_eps.unwrap()).unwrap())
                .collect(),
        ),
        ModelKind::Logistic => Outcome::Binary(
            s.latent
                .iter()
                .map(|&l| sample_bernoulli(rng, expit(s.intercept + s.slope * scale.covariate(l))).unwrap())
                .collect(),
        ),
    };
    DataView { log_w, outcome }
}

/// Runs the successive-conditional simulator and returns one z-score per
/// monitored moment.
pub fn geweke(kind: ModelKind, scale: ExposureScale, seed: u64, rounds: usize) -> Vec<GewekeCheck> {
    let p = priors(kind);
    let mut rng = Rng::new(seed);

    let mut s = state(Vec::new(), seed + 1);
    s.intercept = sample_normal(&mut rng, p.intercept.mean, p.intercept.precision()).unwrap();
    s.slope = sample_normal(&mut rng, p.slope.mean, p.slope.precision()).unwrap();
    s.tau_eps = p.tau_eps.map(|g| sample_gamma(&mut rng, g).unwrap());
    s.tau_e = sample_gamma(&mut rng, p.tau_e).unwrap();
    s.tau_x = sample_gamma(&mut rng, p.tau_x).unwrap();
    s.mu_x = match p.mu_x {
        MuXPrior::Normal(q) => sample_normal(&mut rng, q.mean, q.precision()).unwrap(),
        MuXPrior::LogNormal { log_mean, log_variance } => {
            sample_normal(&mut rng, log_mean, 1.0 / log_variance).unwrap().exp()
        }
    };
    s.latent = (0..N).map(|_| sample_normal(&mut rng, s.mu_x, s.tau_x).unwrap()).collect();

    let (mu_mean, mu_var) = mu_x_moments(p.mu_x);
    let mut checks: Vec<(&str, f64, Statistic)> = vec![
        ("intercept", p.intercept.mean, Box::new(|s| s.intercept)),
        ("slope", p.slope.mean, Box::new(|s| s.slope)),
        ("intercept^2", p.intercept.variance + p.intercept.mean.powi(2), Box::new(|s| s.intercept.powi(2))),
        ("slope^2", p.slope.variance + p.slope.mean.powi(2), Box::new(|s| s.slope.powi(2))),
        ("tau_e", p.tau_e.mean(), Box::new(|s| s.tau_e)),
        ("tau_x", p.tau_x.mean(), Box::new(|s| s.tau_x)),
        ("mu_x", mu_mean, Box::new(|s| s.mu_x)),
        ("mu_x^2", mu_var + mu_mean * mu_mean, Box::new(|s| s.mu_x.powi(2))),
        ("l_0", mu_mean, Box::new(|s| s.latent[0])),
    ];
    if let Some(g) = p.tau_eps {
        checks.push(("tau_eps", g.mean(), Box::new(|s| s.tau_eps.unwrap())));
    }

    let mut series = vec![Vec::with_capacity(rounds); checks.len()];
    let mut spec = ModelSpec::new(simulate_data(&s, kind, scale, &mut rng), p, scale);
    for _ in 0..rounds {
        spec.data = simulate_data(&s, kind, scale, &mut rng);
        scan(&mut s, &spec);
        for (col, (_, _, g)) in series.iter_mut().zip(&checks) {
            col.push(g(&s));
        }
    }

    series
        .iter()
        .zip(&checks)
        .map(|(col, (name, expected, _))| GewekeCheck {
            name: name.to_string(),
            mean: mean(col),
            expected: *expected,
            z: (mean(col) - expected) / batch_means_se(col, BATCHES),
        })
        .collect()
}
