//! JSON run configuration.
//!
//! ```json
//! {
//!   "grids": { "e": { "lower": 0, "upper": 1, "n": 200, "rule": "midpoint" } },
//!   "features": { "family": "indicator" },
//!   "tolerances": { "cutoff_rel": 1e-12 },
//!   "trials": 100,
//!   "seed": 7
//! }
//! ```
//!
//! Exactly one of `kernel`, `features`, `kernel_csv`, `features_csv` must be
//! present. Relative CSV paths, inputs and exports alike, resolve against the
//! config file's directory.

use std::path::{Path, PathBuf};

use rkhslab::features::FeatureFamily;
use rkhslab::grid::{Density, Grid, Rule};
use rkhslab::io::MatrixMode;
use rkhslab::kernel::BuiltinKernel;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SEED_ENV: &str = "RKHSLAB_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("conflicting sources declared: {}", .0.join(", "))]
    ConflictingSources(Vec<&'static str>),
    #[error("no source declared: expected one of kernel, features, kernel_csv, features_csv")]
    MissingSource,
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grids: Grids,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<BuiltinKernel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_csv: Option<MatrixSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features_csv: Option<MatrixSource>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Output,
}

fn default_trials() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    pub e: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<GridSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
    #[serde(default)]
    pub rule: Rule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Density>,
}

impl GridSpec {
    pub fn build(&self) -> rkhslab::Result<Grid> {
        match self.density {
            Some(d) => Grid::with_density(self.lower, self.upper, self.n, self.rule, d),
            None => Grid::uniform(self.lower, self.upper, self.n, self.rule),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSource {
    pub path: PathBuf,
    #[serde(default)]
    pub mode: MatrixMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Spectral cutoff relative to the largest eigenvalue.
    pub cutoff_rel: f64,
    /// Allowed negative eigenvalue, relative to the largest `|λ|`.
    pub tol_psd: f64,
    /// Allowed relative off-diagonal mass for the weighted-`L²` verdict.
    pub tol_diag: f64,
    /// Allowed relative range residual.
    pub range_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            cutoff_rel: rkhslab::kernel::DEFAULT_CUTOFF_REL,
            tol_psd: 1e-10,
            tol_diag: rkhslab::analysis::DEFAULT_TOL_DIAG,
            range_tol: rkhslab::rkhs::DEFAULT_RANGE_TOL,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    /// Export of the (induced) kernel matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_csv: Option<PathBuf>,
    /// Export of the feature matrix, for feature sources.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features_csv: Option<PathBuf>,
}

/// The validated source variant.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Kernel(BuiltinKernel),
    Features(FeatureFamily),
    KernelCsv(MatrixSource),
    FeaturesCsv(MatrixSource),
}

impl Source {
    pub fn is_feature(&self) -> bool {
        matches!(self, Source::Features(_) | Source::FeaturesCsv(_))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, parses and validates; relative CSV paths are joined to the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let inputs = [&mut self.kernel_csv, &mut self.features_csv];
        let outputs = [&mut self.output.kernel_csv, &mut self.output.features_csv];
        let paths = inputs
            .into_iter()
            .flatten()
            .map(|s| &mut s.path)
            .chain(outputs.into_iter().flatten());
        for path in paths {
            if path.is_relative() {
                *path = dir.join(&*path);
            }
        }
    }

    /// Applies `RKHSLAB_SEED` when set.
    pub fn apply_seed_env(&mut self) -> Result<(), ConfigError> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("{SEED_ENV}={v:?} is not a u64")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.source()?;
        let t = &self.tolerances;
        for (name, v) in [
            ("cutoff_rel", t.cutoff_rel),
            ("tol_psd", t.tol_psd),
            ("tol_diag", t.tol_diag),
            ("range_tol", t.range_tol),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(ConfigError::Invalid(format!(
                    "tolerances.{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        if self.trials == 0 {
            return Err(ConfigError::Invalid("trials must be at least 1".into()));
        }
        Ok(())
    }

    pub fn source(&self) -> Result<Source, ConfigError> {
        let mut present = Vec::new();
        if self.kernel.is_some() {
            present.push("kernel");
        }
        if self.features.is_some() {
            present.push("features");
        }
        if self.kernel_csv.is_some() {
            present.push("kernel_csv");
        }
        if self.features_csv.is_some() {
            present.push("features_csv");
        }
        match present.len() {
            0 => Err(ConfigError::MissingSource),
            1 => Ok(if let Some(k) = self.kernel {
                Source::Kernel(k)
            } else if let Some(f) = self.features {
                Source::Features(f)
            } else if let Some(k) = &self.kernel_csv {
                Source::KernelCsv(k.clone())
            } else {
                Source::FeaturesCsv(self.features_csv.clone().expect("one source present"))
            }),
            _ => Err(ConfigError::ConflictingSources(present)),
        }
    }
}
