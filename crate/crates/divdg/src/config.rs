use std::path::{Path, PathBuf};

use divdg_core::adaptivity::DEFAULT_THETA;
use divdg_core::control::DEFAULT_MAX_ITER;
use divdg_core::convergence::DEFAULT_LEVELS;
use divdg_core::problem::DEFAULT_PENALTY;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Uniform,
    Adaptive,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("penalty must be positive, got {0}")]
    Gamma(f64),
    #[error("theta must lie in (0, 1], got {0}")]
    Theta(f64),
    #[error("control cost must be positive, got {0}")]
    Lambda(f64),
    #[error("at least one level is required")]
    NoLevels,
    #[error("levels must be positive and strictly increasing")]
    Levels,
    #[error("pdas iteration limit must be positive")]
    MaxIter,
}

/// Run description; every field has a default so an empty file is valid.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub case: String,
    pub mode: Mode,
    /// Subdivisions per unit length of each uniform level.
    pub levels: Vec<usize>,
    /// Free velocity unknowns allowed in adaptive runs.
    pub max_dofs: usize,
    pub gamma: f64,
    pub theta: f64,
    /// Overrides the case's control cost.
    pub lambda: Option<f64>,
    /// PDAS iteration limit.
    pub max_iter: usize,
    pub out: PathBuf,
    /// Write one VTK file per level.
    pub vtk: bool,
    /// Write the operators of `solve` runs in MatrixMarket format.
    pub dump_matrices: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            case: "accuracy".into(),
            mode: Mode::Uniform,
            levels: DEFAULT_LEVELS.to_vec(),
            max_dofs: 20_000,
            gamma: DEFAULT_PENALTY,
            theta: DEFAULT_THETA,
            lambda: None,
            max_iter: DEFAULT_MAX_ITER,
            out: PathBuf::from("out"),
            vtk: true,
            dump_matrices: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.gamma > 0.0) {
            return Err(ConfigError::Gamma(self.gamma));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(ConfigError::Theta(self.theta));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) {
                return Err(ConfigError::Lambda(l));
            }
        }
        if self.levels.is_empty() {
            return Err(ConfigError::NoLevels);
        }
        if self.levels[0] == 0 || self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::Levels);
        }
        if self.max_iter == 0 {
            return Err(ConfigError::MaxIter);
        }
        Ok(())
    }
}
