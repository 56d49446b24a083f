//! Protocol configuration, loadable from JSON.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use grounded_core::agent::AgentConfig;
use grounded_core::world::Palette;

use crate::fixtures::standard_palette;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub agent: AgentConfig,
    /// Palette the noun example spaces are drawn from.
    pub palette: Palette,
    /// Trials before a category is reported as not converged.
    pub trial_cap: u32,
    /// Objects in each noun example space.
    pub noun_objects: usize,
    /// Noisy re-observations of every object in the noun evaluation pass.
    pub noun_eval_repeats: u32,
    pub arrangements_per_prep: usize,
    /// How many of each preposition's arrangements are near-boundary negatives.
    pub negatives_per_prep: usize,
    pub verb_instances_per_trial: usize,
    pub verb_test_instances: usize,
    pub injection_rate: f64,
    /// Commands before the combined curve gives up.
    pub combined_command_cap: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            agent: AgentConfig::default(),
            palette: standard_palette(),
            trial_cap: 60,
            noun_objects: 12,
            noun_eval_repeats: 10,
            arrangements_per_prep: 24,
            negatives_per_prep: 6,
            verb_instances_per_trial: 2,
            verb_test_instances: 5,
            injection_rate: 0.3,
            combined_command_cap: 40,
        }
    }
}

impl HarnessConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: HarnessConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.trial_cap < 2 {
            return bad("trial_cap must allow two trials");
        }
        if self.noun_objects == 0 || self.arrangements_per_prep == 0 {
            return bad("example spaces must not be empty");
        }
        if self.negatives_per_prep > self.arrangements_per_prep {
            return bad("more negatives than arrangements");
        }
        let p = &self.palette;
        if p.colors.is_empty() || p.sizes.is_empty() || p.shapes.is_empty() {
            return bad("palette needs at least one color, size and shape");
        }
        if !(0.0..=1.0).contains(&self.injection_rate) {
            return bad("injection_rate must be a probability");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = HarnessConfig::from_json(r#"{"trial_cap": 5}"#).unwrap();
        assert_eq!(cfg.trial_cap, 5);
        assert_eq!(cfg.noun_objects, 12);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(HarnessConfig::from_json(r#"{"injection_rate": 2.0}"#).is_err());
        assert!(HarnessConfig::from_json(r#"{"trial_cap": 1}"#).is_err());
        assert!(HarnessConfig::from_json("[").is_err());
    }
}
