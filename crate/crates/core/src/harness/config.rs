use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adjust::{ExposureScale, McmcConfig, ModelKind, SpreadReading, TauEPrior};
use crate::cohort::CohortConfig;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(Error::domain("format", format!("unknown report format `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvidenceConfig {
    pub n: usize,
    pub noise_precision: f64,
    pub sigma_b: f64,
    pub n_values: Vec<usize>,
    pub p_null_values: Vec<f64>,
    pub seed: u64,
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        EvidenceConfig {
            n: 1000,
            noise_precision: 1.0,
            sigma_b: 1.0,
            n_values: vec![10, 100, 1000],
            p_null_values: vec![0.5, 0.1, 0.01, 0.001],
            seed: 20_090_101,
        }
    }
}

/// Everything needed to re-run an experiment. Serialized into every
/// emitted file; the output directory is left out so that runs written to
/// different places stay byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub cohort: CohortConfig,
    pub mcmc: McmcConfig,
    pub prior_variants: Vec<TauEPrior>,
    pub model_kinds: Vec<ModelKind>,
    pub exposure_scale: ExposureScale,
    pub mu_x_prior_reading: SpreadReading,
    #[serde(skip_serializing)]
    pub out_dir: PathBuf,
    pub formats: Vec<ReportFormat>,
    pub emit_traces: bool,
    pub evidence: EvidenceConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            cohort: CohortConfig::default(),
            mcmc: McmcConfig::default(),
            prior_variants: TauEPrior::ALL.to_vec(),
            model_kinds: vec![ModelKind::Linear, ModelKind::Logistic],
            exposure_scale: ExposureScale::Natural,
            mu_x_prior_reading: SpreadReading::Variance,
            out_dir: PathBuf::from("out"),
            formats: vec![ReportFormat::Csv, ReportFormat::Json, ReportFormat::Markdown],
            emit_traces: false,
            evidence: EvidenceConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            reason: e.to_string(),
        })
    }

    /// Sets the master seed for both the cohort and the sampler.
    pub fn set_seed(&mut self, seed: u64) {
        self.cohort.seed = seed;
        self.mcmc.seed = seed;
        self.evidence.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.cohort.validate()?;
        self.mcmc.validate()?;
        if self.prior_variants.is_empty() {
            return Err(Error::domain("prior_variants", "at least one prior variant is required"));
        }
        if self.model_kinds.is_empty() {
            return Err(Error::domain("model_kinds", "at least one model kind is required"));
        }
        if self.formats.is_empty() {
            return Err(Error::domain("formats", "at least one report format is required"));
        }
        Ok(())
    }

    pub fn ensure_out_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.out_dir)?;
        Ok(())
    }
}
