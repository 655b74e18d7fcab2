//! One flat configuration for every subcommand. Any key may be omitted;
//! unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compose::ComposeConfig;
use crate::evalharness::ClickModelConfig;
use crate::featurize::FeaturizerConfig;
use crate::seqnet::TrainConfig;
use crate::synthgen::{GeneratorConfig, Scale};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {reason}")]
    Read { path: String, reason: String },
    #[error("{path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("invalid value: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub seed: u64,

    // featurize
    pub embed_dim: usize,
    pub competency_k: usize,
    pub expand_m: usize,
    pub experience_cap: f64,
    pub hash_width: usize,
    pub expand_in_vectors: bool,
    pub append_competency: bool,

    // training
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub patience: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    /// Interactions drawn on when building training examples.
    pub max_training_interactions: usize,

    // recommendation
    pub experience_relaxation_years: f64,
    pub ml_cutoff: f64,
    pub similar_jobs_threshold: f64,
    pub similar_candidates_threshold: f64,
    pub blend_window: usize,
    pub blend_per_source: usize,
    pub starvation_threshold: u32,
    pub edge_keep_threshold: f64,

    // click simulation
    pub ctr_base_rate: f64,
    pub ctr_preference_scale: f64,
    pub ctr_serendipity_bonus: f64,
    pub ctr_continue_probability: f64,
    pub ctr_sessions: usize,
    pub ctr_common_random_numbers: bool,

    // generator
    pub n_ladders: usize,
    pub ladder_depth: usize,
    pub skills_per_level: usize,
    pub generic_skills: usize,
    pub ladders_per_industry: usize,
    pub n_organizations: usize,
    pub positive_rate: f64,
    pub noise_rate: f64,
}

impl Default for AppConfig {
    fn default() -> Self {
        let f = FeaturizerConfig::default();
        let t = TrainConfig::default();
        let c = ComposeConfig::default();
        let k = ClickModelConfig::default();
        let g = GeneratorConfig::default();
        AppConfig {
            seed: 42,
            embed_dim: f.embed_dim,
            competency_k: f.competency_k,
            expand_m: f.expand_m,
            experience_cap: f.experience_cap,
            hash_width: f.hash_width,
            expand_in_vectors: f.expand_in_vectors,
            append_competency: true,
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            epochs: t.epochs,
            batch_size: t.batch_size,
            dropout: t.dropout,
            patience: t.patience,
            hidden1: t.hidden1,
            hidden2: t.hidden2,
            validation_fraction: t.validation_fraction,
            test_fraction: 0.2,
            max_training_interactions: 200_000,
            experience_relaxation_years: c.experience_relaxation_years,
            ml_cutoff: c.ml_cutoff,
            similar_jobs_threshold: c.similar_jobs_threshold,
            similar_candidates_threshold: c.similar_candidates_threshold,
            blend_window: c.blend_window,
            blend_per_source: c.blend_per_source,
            starvation_threshold: crate::compose::DEFAULT_STARVATION_THRESHOLD,
            edge_keep_threshold: c.edge_keep_threshold,
            ctr_base_rate: k.base_rate,
            ctr_preference_scale: k.preference_scale,
            ctr_serendipity_bonus: k.serendipity_bonus,
            ctr_continue_probability: k.continue_probability,
            ctr_sessions: k.sessions,
            ctr_common_random_numbers: k.common_random_numbers,
            n_ladders: g.n_ladders,
            ladder_depth: g.ladder_depth,
            skills_per_level: g.skills_per_level,
            generic_skills: g.generic_skills,
            ladders_per_industry: g.ladders_per_industry,
            n_organizations: g.n_organizations,
            positive_rate: g.positive_rate,
            noise_rate: g.noise_rate,
        }
    }
}

impl AppConfig {
    /// Reads TOML, or JSON when the file name ends in `.json`.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: display.clone(),
            reason: e.to_string(),
        })?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        let cfg: AppConfig = parsed.map_err(|reason| ConfigError::Parse { path: display, reason })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{name} = {v} is outside [0, 1]")))
            }
        };
        unit("ml_cutoff", self.ml_cutoff)?;
        unit("similar_jobs_threshold", self.similar_jobs_threshold)?;
        unit("similar_candidates_threshold", self.similar_candidates_threshold)?;
        unit("test_fraction", self.test_fraction)?;
        unit("ctr_continue_probability", self.ctr_continue_probability)?;
        if self.experience_relaxation_years < 0.0 {
            return Err(ConfigError::Invalid("experience_relaxation_years must be non-negative".into()));
        }
        if self.blend_window == 0 {
            return Err(ConfigError::Invalid("blend_window must be positive".into()));
        }
        self.train_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.generator_config(Scale::Small)
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn featurizer_config(&self) -> FeaturizerConfig {
        FeaturizerConfig {
            embed_dim: self.embed_dim,
            competency_k: self.competency_k,
            expand_m: self.expand_m,
            experience_cap: self.experience_cap,
            hash_width: self.hash_width,
            expand_in_vectors: self.expand_in_vectors,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            epochs: self.epochs,
            batch_size: self.batch_size,
            dropout: self.dropout,
            seed: self.seed,
            patience: self.patience,
            hidden1: self.hidden1,
            hidden2: self.hidden2,
            validation_fraction: self.validation_fraction,
        }
    }

    pub fn compose_config(&self, top: Option<usize>) -> ComposeConfig {
        ComposeConfig {
            experience_relaxation_years: self.experience_relaxation_years,
            ml_cutoff: self.ml_cutoff,
            similar_jobs_threshold: self.similar_jobs_threshold,
            similar_candidates_threshold: self.similar_candidates_threshold,
            blend_window: self.blend_window,
            blend_per_source: self.blend_per_source,
            edge_keep_threshold: self.edge_keep_threshold,
            top,
        }
    }

    pub fn click_model(&self) -> ClickModelConfig {
        ClickModelConfig {
            base_rate: self.ctr_base_rate,
            preference_scale: self.ctr_preference_scale,
            serendipity_bonus: self.ctr_serendipity_bonus,
            continue_probability: self.ctr_continue_probability,
            sessions: self.ctr_sessions,
            common_random_numbers: self.ctr_common_random_numbers,
        }
    }

    pub fn generator_config(&self, scale: Scale) -> GeneratorConfig {
        GeneratorConfig {
            n_ladders: self.n_ladders,
            ladder_depth: self.ladder_depth,
            skills_per_level: self.skills_per_level,
            generic_skills: self.generic_skills,
            ladders_per_industry: self.ladders_per_industry,
            n_organizations: self.n_organizations,
            positive_rate: self.positive_rate,
            noise_rate: self.noise_rate,
            seed: self.seed,
            ..GeneratorConfig::for_scale(scale)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = AppConfig::default();
        let back: AppConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.similar_jobs_threshold, 0.70);
        assert_eq!(c.starvation_threshold, 50);
    }

    #[test]
    fn partial_files_and_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "seed = 7\nml_cutoff = 0.6\n").unwrap();
        let c = AppConfig::load(&p).unwrap();
        assert_eq!((c.seed, c.ml_cutoff, c.epochs), (7, 0.6, 30));
        std::fs::write(&p, "sed = 7\n").unwrap();
        assert!(matches!(AppConfig::load(&p), Err(ConfigError::Parse { .. })));
        let j = dir.path().join("c.json");
        std::fs::write(&j, r#"{"blend_window": 5}"#).unwrap();
        assert_eq!(AppConfig::load(&j).unwrap().blend_window, 5);
        std::fs::write(&p, "ml_cutoff = 1.5\n").unwrap();
        assert!(matches!(AppConfig::load(&p), Err(ConfigError::Invalid(_))));
    }
}
