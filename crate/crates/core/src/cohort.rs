//! Simulated cohorts under the multiplicative error model `W = X * e`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{check_precision, domain, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    Continuous,
    Binary,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortConfig {
    pub n: usize,
    pub mu_x: f64,
    pub tau_x: f64,
    pub tau_e: f64,
    pub outcome_kind: OutcomeKind,
    pub pi: f64,
    /// Continuous-outcome slope on `log X`.
    pub beta_true: f64,
    /// Log-odds slope on `log X`.
    pub alpha_true: f64,
    pub tau_y: f64,
    pub seed: u64,
}

impl Default for CohortConfig {
    /// The null cohort: 100,000 subjects, `X ~ LN(0, 1)`, `tau_e = 1`,
    /// `Y ~ N(0, 1)` and 5% prevalence.
    fn default() -> Self {
        CohortConfig {
            n: 100_000,
            mu_x: 0.0,
            tau_x: 1.0,
            tau_e: 1.0,
            outcome_kind: OutcomeKind::Both,
            pi: 0.05,
            beta_true: 0.0,
            alpha_true: 0.0,
            tau_y: 1.0,
            seed: 20_090_101,
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::domain("n", "cohort needs at least one subject"));
        }
        if !self.mu_x.is_finite() {
            return Err(Error::domain("mu_x", "must be finite"));
        }
        check_precision("tau_x", self.tau_x)?;
        check_precision("tau_e", self.tau_e)?;
        check_precision("tau_y", self.tau_y)?;
        if !(self.pi > 0.0 && self.pi < 1.0) {
            return Err(Error::domain("pi", format!("must lie strictly between 0 and 1, got {}", self.pi)));
        }
        if !self.beta_true.is_finite() {
            return Err(Error::domain("beta_true", "must be finite"));
        }
        if !self.alpha_true.is_finite() {
            return Err(Error::domain("alpha_true", "must be finite"));
        }
        Ok(())
    }

    /// Attenuation of a slope on `log X` when `log W` is used instead.
    pub fn log_scale_reliability(&self) -> f64 {
        self.tau_e / (self.tau_x + self.tau_e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortRecord {
    pub x_true: f64,
    pub w_obs: f64,
    pub y: f64,
    pub z: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cohort {
    pub records: Vec<CohortRecord>,
    pub config: CohortConfig,
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn w(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.w_obs).collect()
    }

    pub fn log_w(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.w_obs.ln()).collect()
    }

    pub fn y(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.y).collect()
    }

    pub fn z(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.z).collect()
    }

    /// First `n` subjects as a cohort of their own.
    pub fn prefix(&self, n: usize) -> Cohort {
        let records = self.records[..n.min(self.len())].to_vec();
        let mut config = self.config.clone();
        config.n = records.len();
        Cohort { records, config }
    }
}

fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Draws one cohort. Subject `i` uses its own stream derived from
/// `(seed, i)`, so the output does not depend on how the work is split.
pub fn simulate_cohort(config: &CohortConfig) -> Result<Cohort> {
    config.validate()?;
    let sd_x = 1.0 / config.tau_x.sqrt();
    let sd_e = 1.0 / config.tau_e.sqrt();
    let sd_y = 1.0 / config.tau_y.sqrt();
    let logit_pi = (config.pi / (1.0 - config.pi)).ln();
    let records = (0..config.n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::stream(config.seed, domain::COHORT, i);
            let log_x = config.mu_x + sd_x * rng.std_normal();
            let log_e = sd_e * rng.std_normal();
            let y = config.beta_true * log_x + sd_y * rng.std_normal();
            let p = expit(logit_pi + config.alpha_true * log_x);
            let z = u8::from(rng.uniform() < p);
            CohortRecord { x_true: log_x.exp(), w_obs: (log_x + log_e).exp(), y, z }
        })
        .collect();
    Ok(Cohort { records, config: config.clone() })
}

pub const CSV_HEADER: &str = "x_true,w_obs,y,z";

/// Writes the cohort as CSV. The resolved config is embedded as a leading
/// `#` comment line; floats use the shortest representation that parses
/// back to the same bits.
pub fn write_cohort(cohort: &Cohort, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "# config: {}", serde_json::to_string(&cohort.config)?)?;
    writeln!(out, "{CSV_HEADER}")?;
    for r in &cohort.records {
        writeln!(out, "{:?},{:?},{:?},{}", r.x_true, r.w_obs, r.y, r.z)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_cohort(path: &Path) -> Result<Cohort> {
    let reader = BufReader::new(fs::File::open(path)?);
    let parse_err = |line: usize, reason: String| Error::Parse { path: path.to_path_buf(), line, reason };

    let mut config: Option<CohortConfig> = None;
    let mut saw_header = false;
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(json) = comment.trim().strip_prefix("config:") {
                config = Some(
                    serde_json::from_str(json.trim())
                        .map_err(|e| parse_err(lineno, format!("bad config comment: {e}")))?,
                );
            }
            continue;
        }
        if !saw_header {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["x_true", "w_obs", "y", "z"] {
                return Err(parse_err(lineno, format!("expected header `{CSV_HEADER}`, got `{line}`")));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(parse_err(lineno, format!("expected 4 fields, got {}", fields.len())));
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            let v: f64 = fields[i]
                .parse()
                .map_err(|_| parse_err(lineno, format!("column {name}: `{}` is not a number", fields[i])))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("column {name}: non-finite value")));
            }
            Ok(v)
        };
        let x_true = num(0, "x_true")?;
        let w_obs = num(1, "w_obs")?;
        let y = num(2, "y")?;
        if x_true <= 0.0 {
            return Err(parse_err(lineno, format!("x_true must be positive, got {x_true}")));
        }
        if w_obs <= 0.0 {
            return Err(parse_err(lineno, format!("w_obs must be positive, got {w_obs}")));
        }
        let z = match fields[3] {
            "0" => 0,
            "1" => 1,
            other => return Err(parse_err(lineno, format!("column z: `{other}` is not 0 or 1"))),
        };
        records.push(CohortRecord { x_true, w_obs, y, z });
    }
    if !saw_header {
        return Err(parse_err(0, "missing header".into()));
    }
    let mut config = config.unwrap_or_default();
    config.n = records.len();
    Ok(Cohort { records, config })
}
