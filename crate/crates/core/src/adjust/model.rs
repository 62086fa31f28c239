use serde::{Deserialize, Serialize};

use crate::cohort::{Cohort, CohortConfig};
use crate::error::{Error, Result};
use crate::rng::GammaParams;

/// Normal prior in mean–variance form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub variance: f64,
}

impl NormalPrior {
    pub const fn new(mean: f64, variance: f64) -> Self {
        NormalPrior { mean, variance }
    }

    pub fn precision(&self) -> f64 {
        1.0 / self.variance
    }

    pub fn log_kernel(&self, x: f64) -> f64 {
        -0.5 * (x - self.mean).powi(2) / self.variance
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        if !self.mean.is_finite() {
            return Err(Error::domain(name, "prior mean must be finite"));
        }
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::domain(name, format!("prior variance must be positive, got {}", self.variance)));
        }
        Ok(())
    }
}

/// Prior on `mu_x`, the log-scale mean of the true exposure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum MuXPrior {
    Normal(NormalPrior),
    /// `ln(mu_x) ~ N(log_mean, log_variance)`; confines `mu_x` to `(0, inf)`.
    LogNormal {
        log_mean: f64,
        log_variance: f64,
    },
}

impl MuXPrior {
    pub fn log_density(&self, mu_x: f64) -> f64 {
        match *self {
            MuXPrior::Normal(p) => p.log_kernel(mu_x),
            MuXPrior::LogNormal { log_mean, log_variance } => {
                if mu_x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    let eta = mu_x.ln();
                    -eta - 0.5 * (eta - log_mean).powi(2) / log_variance
                }
            }
        }
    }

    pub fn in_support(&self, mu_x: f64) -> bool {
        self.log_density(mu_x).is_finite()
    }

    fn validate(&self) -> Result<()> {
        match *self {
            MuXPrior::Normal(p) => p.validate("mu_x_prior"),
            MuXPrior::LogNormal { log_mean, log_variance } => {
                NormalPrior::new(log_mean, log_variance).validate("mu_x_prior")
            }
        }
    }
}

/// How the second argument of a lognormal prior on `mu_x` is read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpreadReading {
    #[default]
    Variance,
    Precision,
}

/// The four priors on the measurement-error precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauEPrior {
    /// Γ(0.1, 10): mean 1, variance 10.
    Uninformative,
    /// Γ(1, 1): centred on the true error precision.
    #[serde(rename = "typeA")]
    TypeA,
    /// Γ(0.5, 1): inflated error.
    #[serde(rename = "typeB")]
    TypeB,
    /// Γ(0.05, 1): strongly inflated error.
    #[serde(rename = "typeC")]
    TypeC,
}

impl TauEPrior {
    pub const ALL: [TauEPrior; 4] = [TauEPrior::Uninformative, TauEPrior::TypeA, TauEPrior::TypeB, TauEPrior::TypeC];

    pub fn gamma(self) -> GammaParams {
        let (shape, scale) = match self {
            TauEPrior::Uninformative => (0.1, 10.0),
            TauEPrior::TypeA => (1.0, 1.0),
            TauEPrior::TypeB => (0.5, 1.0),
            TauEPrior::TypeC => (0.05, 1.0),
        };
        GammaParams { shape, scale }
    }

    pub fn label(self) -> &'static str {
        match self {
            TauEPrior::Uninformative => "Uninformative",
            TauEPrior::TypeA => "Informative type A",
            TauEPrior::TypeB => "Informative type B",
            TauEPrior::TypeC => "Informative type C",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            TauEPrior::Uninformative => "uninformative",
            TauEPrior::TypeA => "typeA",
            TauEPrior::TypeB => "typeB",
            TauEPrior::TypeC => "typeC",
        }
    }
}

impl std::str::FromStr for TauEPrior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uninformative" | "u" => Ok(TauEPrior::Uninformative),
            "typea" | "a" => Ok(TauEPrior::TypeA),
            "typeb" | "b" => Ok(TauEPrior::TypeB),
            "typec" | "c" => Ok(TauEPrior::TypeC),
            _ => Err(Error::domain("prior", format!("unknown tau_e prior `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Logistic,
}

impl ModelKind {
    pub fn intercept_name(self) -> &'static str {
        match self {
            ModelKind::Linear => "beta0",
            ModelKind::Logistic => "alpha0",
        }
    }

    pub fn slope_name(self) -> &'static str {
        match self {
            ModelKind::Linear => "beta",
            ModelKind::Logistic => "alpha",
        }
    }

    /// Names of the monitored scalar parameters, in trace column order.
    pub fn parameter_names(self) -> Vec<&'static str> {
        match self {
            ModelKind::Linear => vec!["beta0", "beta", "tau_eps", "tau_e", "mu_x", "tau_x"],
            ModelKind::Logistic => vec!["alpha0", "alpha", "tau_e", "mu_x", "tau_x"],
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(ModelKind::Linear),
            "logistic" => Ok(ModelKind::Logistic),
            _ => Err(Error::domain("kind", format!("unknown model kind `{s}`"))),
        }
    }
}

/// Scale on which the latent exposure enters the outcome model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExposureScale {
    /// Outcome regressed on `X` itself.
    #[default]
    Natural,
    /// Outcome regressed on `log X`.
    Log,
}

impl ExposureScale {
    #[inline]
    pub fn covariate(self, latent: f64) -> f64 {
        match self {
            ExposureScale::Natural => latent.exp(),
            ExposureScale::Log => latent,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSet {
    pub intercept: NormalPrior,
    pub slope: NormalPrior,
    pub mu_x: MuXPrior,
    pub tau_x: GammaParams,
    /// Residual precision of the continuous outcome; unused by the logistic model.
    pub tau_eps: Option<GammaParams>,
    pub tau_e: GammaParams,
}

impl PriorSet {
    /// Priors of the continuous-outcome model: N(0, 100) coefficients,
    /// LN(0, 100) on `mu_x`, Γ(0.01, 10) precisions.
    pub fn linear(tau_e: TauEPrior, reading: SpreadReading) -> Self {
        let spread = match reading {
            SpreadReading::Variance => 100.0,
            SpreadReading::Precision => 1.0 / 100.0,
        };
        PriorSet {
            intercept: NormalPrior::new(0.0, 100.0),
            slope: NormalPrior::new(0.0, 100.0),
            mu_x: MuXPrior::LogNormal { log_mean: 0.0, log_variance: spread },
            tau_x: GammaParams { shape: 0.01, scale: 10.0 },
            tau_eps: Some(GammaParams { shape: 0.01, scale: 10.0 }),
            tau_e: tau_e.gamma(),
        }
    }

    /// Priors of the binary-outcome model: N(0, 10) coefficients and
    /// `mu_x`, Γ(0.1, 10) on `tau_x`.
    pub fn logistic(tau_e: TauEPrior) -> Self {
        PriorSet {
            intercept: NormalPrior::new(0.0, 10.0),
            slope: NormalPrior::new(0.0, 10.0),
            mu_x: MuXPrior::Normal(NormalPrior::new(0.0, 10.0)),
            tau_x: GammaParams { shape: 0.1, scale: 10.0 },
            tau_eps: None,
            tau_e: tau_e.gamma(),
        }
    }

    pub fn for_kind(kind: ModelKind, tau_e: TauEPrior, reading: SpreadReading) -> Self {
        match kind {
            ModelKind::Linear => Self::linear(tau_e, reading),
            ModelKind::Logistic => Self::logistic(tau_e),
        }
    }

    pub fn validate(&self, kind: ModelKind) -> Result<()> {
        self.intercept.validate("intercept_prior")?;
        self.slope.validate("slope_prior")?;
        self.mu_x.validate()?;
        self.tau_x.validate()?;
        self.tau_e.validate()?;
        match (kind, &self.tau_eps) {
            (ModelKind::Linear, None) => Err(Error::domain("tau_eps_prior", "required by the linear model")),
            (_, Some(p)) => p.validate(),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Continuous(Vec<f64>),
    Binary(Vec<u8>),
}

/// What the sampler may see: observed exposures and one outcome. The true
/// exposures never enter this view.
#[derive(Clone, Debug, PartialEq)]
pub struct DataView {
    pub log_w: Vec<f64>,
    pub outcome: Outcome,
}

impl DataView {
    pub fn from_cohort(cohort: &Cohort, kind: ModelKind) -> Self {
        let outcome = match kind {
            ModelKind::Linear => Outcome::Continuous(cohort.y()),
            ModelKind::Logistic => Outcome::Binary(cohort.z()),
        };
        DataView { log_w: cohort.log_w(), outcome }
    }

    pub fn len(&self) -> usize {
        self.log_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_w.is_empty()
    }

    pub fn kind(&self) -> ModelKind {
        match self.outcome {
            Outcome::Continuous(_) => ModelKind::Linear,
            Outcome::Binary(_) => ModelKind::Logistic,
        }
    }

    fn validate(&self) -> Result<()> {
        let n_out = match &self.outcome {
            Outcome::Continuous(y) => {
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::domain("y", "outcome must be finite"));
                }
                y.len()
            }
            Outcome::Binary(z) => {
                if z.iter().any(|&v| v > 1) {
                    return Err(Error::domain("z", "outcome must be 0 or 1"));
                }
                z.len()
            }
        };
        if n_out != self.log_w.len() {
            return Err(Error::domain("outcome", "length differs from exposure length"));
        }
        if self.log_w.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("w_obs", "observed exposures must be positive and finite"));
        }
        Ok(())
    }
}

/// Generating values of the simulation, used to start chains "at their
/// expected values".
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationTruth {
    pub mu_x: f64,
    pub tau_x: f64,
    pub tau_e: f64,
    pub tau_y: f64,
}

impl From<&CohortConfig> for SimulationTruth {
    fn from(c: &CohortConfig) -> Self {
        SimulationTruth { mu_x: c.mu_x, tau_x: c.tau_x, tau_e: c.tau_e, tau_y: c.tau_y }
    }
}

impl Default for SimulationTruth {
    fn default() -> Self {
        SimulationTruth::from(&CohortConfig::default())
    }
}

/// Parameters held fixed instead of sampled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Clamp {
    pub tau_e: Option<f64>,
    /// Hold every latent log exposure at its observed value.
    pub latent_at_observed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub scale: ExposureScale,
    pub priors: PriorSet,
    pub data: DataView,
    pub truth: SimulationTruth,
    pub clamp: Clamp,
}

impl ModelSpec {
    pub fn new(data: DataView, priors: PriorSet, scale: ExposureScale) -> Self {
        ModelSpec { scale, priors, data, truth: SimulationTruth::default(), clamp: Clamp::default() }
    }

    /// Model for one outcome of a cohort, starting values taken from the
    /// cohort's generating config.
    pub fn from_cohort(cohort: &Cohort, kind: ModelKind, priors: PriorSet, scale: ExposureScale) -> Self {
        ModelSpec {
            scale,
            priors,
            data: DataView::from_cohort(cohort, kind),
            truth: SimulationTruth::from(&cohort.config),
            clamp: Clamp::default(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.data.kind()
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.priors.validate(self.kind())?;
        if let Some(t) = self.clamp.tau_e {
            crate::rng::check_precision("tau_e", t)?;
        }
        Ok(())
    }
}
