//! Run configuration. Every tunable lives here and is copied into each report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bottleneck::DEFAULT_SUCCESS_THRESHOLD;
use crate::cdc::{DEFAULT_ALPHA_SIG, DEFAULT_EPSILON, DEFAULT_MAX_COND, DEFAULT_PATH_CAP};
use crate::error::{Error, Result};
use crate::features::{DEFAULT_CONTEXT_DIM, DEFAULT_PROJECTION_SEED, DEFAULT_WINDOW};
use crate::ranking::{FinalScoreWeights, DEFAULT_BLOCK_LEN, DEFAULT_BOOTSTRAP, DEFAULT_K_TOP, MIN_BOOTSTRAP};
use crate::scm::{NormalBaseline, DEFAULT_ALPHA};
use crate::trace::DEFAULT_OVERLAP_THRESHOLD;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapleyConfig {
    pub permutations: usize,
    pub stderr_target: f64,
    /// Agent counts up to this use exact enumeration.
    pub exact_limit: usize,
}

impl Default for ShapleyConfig {
    fn default() -> Self {
        Self {
            permutations: 2000,
            stderr_target: 0.01,
            exact_limit: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub window: usize,
    pub context_dim: usize,
    pub projection_seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            context_dim: DEFAULT_CONTEXT_DIM,
            projection_seed: DEFAULT_PROJECTION_SEED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    pub timeout_ms: u64,
    pub max_in_flight: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            kind: EmbedderKind::Mock,
            timeout_ms: 5000,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdcConfig {
    pub alpha_sig: f64,
    pub max_cond: usize,
    pub path_cap: usize,
    pub epsilon: f64,
    pub context_conditioning: bool,
    /// z-score every variable before discovery, so local effects are standardized.
    pub standardize: bool,
}

impl Default for CdcConfig {
    fn default() -> Self {
        Self {
            alpha_sig: DEFAULT_ALPHA_SIG,
            max_cond: DEFAULT_MAX_COND,
            path_cap: DEFAULT_PATH_CAP,
            epsilon: DEFAULT_EPSILON,
            context_conditioning: true,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankingConfig {
    pub weights: FinalScoreWeights,
    pub bootstrap: usize,
    pub k_top: usize,
    pub block_len: usize,
}

impl Default for RankingConfig {
    fn default() -> Self {
        Self {
            weights: FinalScoreWeights::default(),
            bootstrap: DEFAULT_BOOTSTRAP,
            k_top: DEFAULT_K_TOP,
            block_len: DEFAULT_BLOCK_LEN,
        }
    }
}

/// Model used when no reference runs are available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub weight_sum: f64,
    pub nominal: f64,
    pub noise_scale: f64,
    /// Resimulated samples fed to discovery.
    pub replicates: usize,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            weight_sum: 0.9,
            nominal: 0.9,
            noise_scale: 0.05,
            replicates: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub success_threshold: f64,
    pub overlap_threshold: f64,
    /// Shapley amplification strength α.
    pub alpha: f64,
    /// Reverse data-flow edges before modelling.
    pub invert: bool,
    /// What a repaired node does: its own noise-free mechanism or a fixed value.
    pub normal: NormalBaseline,
    pub shapley: ShapleyConfig,
    pub features: FeatureConfig,
    pub embedder: EmbedderConfig,
    pub cdc: CdcConfig,
    pub ranking: RankingConfig,
    pub prior: PriorConfig,
    pub record_timings: bool,
    /// Worker threads. Results do not depend on it, so reports leave it out.
    #[serde(skip_serializing)]
    pub jobs: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 7,
            success_threshold: DEFAULT_SUCCESS_THRESHOLD,
            overlap_threshold: DEFAULT_OVERLAP_THRESHOLD,
            alpha: DEFAULT_ALPHA,
            invert: true,
            normal: NormalBaseline::Mechanism,
            shapley: ShapleyConfig::default(),
            features: FeatureConfig::default(),
            embedder: EmbedderConfig::default(),
            cdc: CdcConfig::default(),
            ranking: RankingConfig::default(),
            prior: PriorConfig::default(),
            record_timings: false,
            jobs: 1,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("success_threshold", self.success_threshold)?;
        unit("overlap_threshold", self.overlap_threshold)?;
        unit("cdc.alpha_sig", self.cdc.alpha_sig)?;
        unit("cdc.epsilon", self.cdc.epsilon)?;
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if self.ranking.bootstrap < MIN_BOOTSTRAP {
            return Err(Error::Config(format!(
                "ranking.bootstrap must be at least {MIN_BOOTSTRAP}, got {}",
                self.ranking.bootstrap
            )));
        }
        if self.ranking.k_top == 0 || self.ranking.block_len == 0 {
            return Err(Error::Config("ranking.k_top and ranking.block_len must be positive".into()));
        }
        FinalScoreWeights::new(self.ranking.weights.w1, self.ranking.weights.w2, self.ranking.weights.w3)?;
        if self.shapley.exact_limit > crate::shapley::EXACT_LIMIT {
            return Err(Error::Config(format!(
                "shapley.exact_limit cannot exceed {}",
                crate::shapley::EXACT_LIMIT
            )));
        }
        if self.shapley.permutations < crate::shapley::MIN_PERMUTATIONS {
            return Err(Error::Config(format!(
                "shapley.permutations must be at least {}",
                crate::shapley::MIN_PERMUTATIONS
            )));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be positive".into()));
        }
        if self.features.context_dim == 0 || self.cdc.path_cap == 0 {
            return Err(Error::Config("features.context_dim and cdc.path_cap must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = Config::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(Config::from_json(&text).unwrap(), c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = Config::from_json(r#"{"alpha": 0.0, "cdc": {"context_conditioning": false}, "normal": {"nominal": 1.0}}"#).unwrap();
        assert_eq!(c.alpha, 0.0);
        assert!(!c.cdc.context_conditioning);
        assert_eq!(c.cdc.max_cond, 3);
        assert_eq!(c.normal, NormalBaseline::Nominal(1.0));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::from_json(r#"{"ranking": {"bootstrap": 10}}"#).is_err());
        assert!(Config::from_json(r#"{"unknown": 1}"#).is_err());
        assert!(Config::from_json(r#"{"success_threshold": 2.0}"#).is_err());
    }
}
