//! Pipeline configuration: one TOML file with a section per module.
//!
//! Every field has a default, so a config file only lists overrides. The
//! top-level `seed` drives every stage unless `--seed` overrides it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use papillae::features::FeatureConfig;
use papillae::learn::{EvalConfig, ModelConfig};
use papillae::map::MapConfig;
use papillae::synth::gen::SynthConfig;
use papillae::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub synth: SynthConfig<f64>,
    pub features: FeatureConfig<f64>,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub map: MapSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    /// Label column to predict.
    pub label: String,
    /// Group column for the leave-one-group-out protocol.
    pub group: String,
    pub protocol: Protocol,
    /// Feature columns to train on; empty means every column in the CSV.
    pub features: Vec<String>,
    /// Absolute-correlation threshold for the redundancy filter; unset
    /// keeps all columns.
    pub correlation_threshold: Option<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            label: "label_type".to_string(),
            group: "participant".to_string(),
            protocol: Protocol::RandomSplit,
            features: Vec::new(),
            correlation_threshold: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    RandomSplit,
    Logo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub test_frac: f64,
    pub repeats: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            test_frac: 0.2,
            repeats: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapSection {
    pub grid_step: f64,
    pub snap_radius: f64,
    pub max_hops: usize,
    pub dedup_radius: f64,
    pub min_prominence: f64,
}

impl Default for MapSection {
    fn default() -> Self {
        let d = MapConfig::default();
        Self {
            grid_step: d.grid_step,
            snap_radius: d.snap_radius,
            max_hops: d.max_hops,
            dedup_radius: d.dedup_radius,
            min_prominence: d.min_prominence,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| {
            Error::invalid(format!("config {}: {}", path.display(), e.message()))
        })
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn eval_config(&self, seed: u64) -> EvalConfig {
        EvalConfig {
            test_frac: self.eval.test_frac,
            repeats: self.eval.repeats,
            seed,
            model: self.model.clone(),
        }
    }

    pub fn map_config(&self, seed: u64) -> MapConfig {
        MapConfig {
            grid_step: self.map.grid_step,
            snap_radius: self.map.snap_radius,
            max_hops: self.map.max_hops,
            dedup_radius: self.map.dedup_radius,
            min_prominence: self.map.min_prominence,
            features: self.features.clone(),
            seed,
        }
    }
}
