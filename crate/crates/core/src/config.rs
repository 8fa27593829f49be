use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("temperature must be positive and finite, got {0}")]
    Temperature(f64),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("global weight must lie in [0, 1], got {0}")]
    GlobalWeight(f64),
    #[error("similarity threshold must lie in [-1, 1], got {0}")]
    Threshold(f64),
}

/// How string lengths are measured for the local heuristic's length score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    /// Unicode scalar values.
    #[default]
    Chars,
    Bytes,
}

impl LengthUnit {
    pub fn measure(self, s: &str) -> usize {
        match self {
            LengthUnit::Chars => s.chars().count(),
            LengthUnit::Bytes => s.len(),
        }
    }
}

/// Hyperparameters of the hybrid initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicConfig {
    pub temperature: f64,
    pub k_neighbors: usize,
    pub global_weight: f64,
    pub similarity_threshold: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub length_unit: LengthUnit,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            temperature: 0.6,
            k_neighbors: 10,
            global_weight: 0.3,
            similarity_threshold: None,
            seed: 0,
            length_unit: LengthUnit::Chars,
        }
    }
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(ConfigError::Temperature(self.temperature));
        }
        if self.k_neighbors == 0 {
            return Err(ConfigError::ZeroK);
        }
        if !(0.0..=1.0).contains(&self.global_weight) {
            return Err(ConfigError::GlobalWeight(self.global_weight));
        }
        if let Some(t) = self.similarity_threshold {
            if !(-1.0..=1.0).contains(&t) {
                return Err(ConfigError::Threshold(t));
            }
        }
        Ok(())
    }
}
