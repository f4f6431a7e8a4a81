//! Run configuration: one TOML file drives both the generator and the
//! analysis pipeline. Unknown keys are rejected everywhere so typos
//! fail loudly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use cdrflow_core::cohort::CohortConfig;
use cdrflow_core::geofeat::GeoConfig;

use crate::synth::GeneratorConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("referenced path not found: {0}")]
    MissingPath(PathBuf),
}

/// Input file locations, resolved relative to the config file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub calls: PathBuf,
    pub profiles: PathBuf,
    pub estates: PathBuf,
    pub aliases: Option<PathBuf>,
}

/// Ingest-stage knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestSettings {
    /// Users with more unique contacts than this over the full dataset
    /// are dropped (robots/customer-service lines). `0` disables.
    pub high_degree_cap: usize,
    /// Province code of the home region; profiles with this birth
    /// province are locals.
    pub home_province: u16,
}

impl Default for IngestSettings {
    fn default() -> Self {
        IngestSettings {
            high_degree_cap: 500,
            home_province: 31,
        }
    }
}

/// Experiment-suite settings shared by all selectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSettings {
    /// Cross-validation folds.
    pub folds: usize,
    /// Default feature horizon in days since first activity.
    pub horizon_days: u32,
    /// Early-detection horizons (inclusive range).
    pub early_k_min: u32,
    pub early_k_max: u32,
    /// Train/test horizons for the disentanglement matrix.
    pub disentangle_k: Vec<u32>,
    pub disentangle_t: Vec<u32>,
    /// Forest size and depth.
    pub n_trees: usize,
    pub max_depth: usize,
    /// Ridge strength for logistic regression.
    pub l2: f64,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            folds: 5,
            horizon_days: 14,
            early_k_min: 3,
            early_k_max: 14,
            disentangle_k: vec![3, 5, 7, 10, 14],
            disentangle_t: vec![3, 5, 7, 10, 14],
            n_trees: 100,
            max_depth: 12,
            l2: 1e-3,
        }
    }
}

/// The whole run file. `seed` is deliberately required.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 means "all available cores".
    #[serde(default)]
    pub workers: usize,
    /// Dataset epoch: UTC seconds corresponding to day 0.
    #[serde(default)]
    pub epoch: i64,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub ingest: IngestSettings,
    #[serde(default)]
    pub cohort: CohortConfig,
    #[serde(default)]
    pub geo: GeoConfig,
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub experiment: ExperimentSettings,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: RunConfig = toml::from_str(&text)?;
        cfg.validate()?;
        // Relative input paths resolve against the config file's
        // directory.
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.paths.calls,
            &mut cfg.paths.profiles,
            &mut cfg.paths.estates,
        ] {
            if p.as_os_str().is_empty() {
                continue;
            }
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(a) = cfg.paths.aliases.as_mut() {
            if a.is_relative() {
                *a = base.join(&*a);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.cohort.validate().map_err(ConfigError::Invalid)?;
        let e = &self.experiment;
        if e.folds < 2 {
            return Err(ConfigError::Invalid("experiment.folds must be >= 2".into()));
        }
        if e.horizon_days == 0 {
            return Err(ConfigError::Invalid("experiment.horizon_days must be >= 1".into()));
        }
        if e.early_k_min == 0 || e.early_k_min > e.early_k_max {
            return Err(ConfigError::Invalid(
                "experiment.early_k_min..early_k_max must be a nonempty range from >= 1".into(),
            ));
        }
        if e.disentangle_k.is_empty() || e.disentangle_t.is_empty() {
            return Err(ConfigError::Invalid(
                "disentangle_k and disentangle_t must be nonempty".into(),
            ));
        }
        if e.n_trees == 0 {
            return Err(ConfigError::Invalid("experiment.n_trees must be >= 1".into()));
        }
        Ok(())
    }

    /// Fails if any declared input file does not exist.
    pub fn check_paths(&self) -> Result<(), ConfigError> {
        for p in [&self.paths.calls, &self.paths.profiles, &self.paths.estates] {
            if !p.is_file() {
                return Err(ConfigError::MissingPath(p.clone()));
            }
        }
        if let Some(a) = &self.paths.aliases {
            if !a.is_file() {
                return Err(ConfigError::MissingPath(a.clone()));
            }
        }
        Ok(())
    }
}
