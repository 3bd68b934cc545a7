use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::{NodeInitConfig, SkipGramConfig};
use crate::model::{Activation, ModelConfig};
use crate::syvc::{default_api_list, load_api_list, parse_kinds};

use super::{PipelineError, SpgOptions, TrainConfig};

/// Flat `key = value` settings shared by every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Share of programs in the training split.
    pub split_ratio: f64,
    /// Comma-separated SyVC kinds.
    pub kinds: String,
    /// Path of a sensitive-API list; the built-in list when unset.
    pub api: Option<String>,
    pub normalize: bool,

    pub embedding_dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub embedding_epochs: usize,
    pub embedding_learning_rate: f64,
    pub min_count: usize,

    pub max_tokens: usize,
    pub heads: usize,
    pub hidden: usize,
    pub layers: usize,
    pub rgcn_activation: Activation,
    pub attention_activation: Activation,

    pub learning_rate: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub validation_fraction: f64,
    pub balanced: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let sg = SkipGramConfig::default();
        let node = NodeInitConfig::default();
        let model = ModelConfig::default();
        let train = TrainConfig::default();
        PipelineConfig {
            seed: 0,
            split_ratio: 0.75,
            kinds: "fc,au,pu,ae,fp,fr".into(),
            api: None,
            normalize: true,
            embedding_dim: sg.dim,
            window: sg.window,
            negatives: sg.negatives,
            embedding_epochs: sg.epochs,
            embedding_learning_rate: sg.learning_rate,
            min_count: sg.min_count,
            max_tokens: node.m,
            heads: node.a,
            hidden: node.z,
            layers: model.layers,
            rgcn_activation: model.rgcn_activation,
            attention_activation: model.attention_activation,
            learning_rate: train.learning_rate,
            patience: train.patience,
            max_epochs: train.max_epochs,
            validation_fraction: train.validation_fraction,
            balanced: train.balanced,
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<PipelineConfig, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<PipelineConfig, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        PipelineConfig::parse(&text)
    }

    pub fn spg_options(&self) -> Result<SpgOptions, PipelineError> {
        let api = match &self.api {
            Some(p) => load_api_list(p)?,
            None => default_api_list(),
        };
        Ok(SpgOptions { kinds: parse_kinds(&self.kinds)?, api, normalize: self.normalize })
    }

    pub fn skipgram(&self) -> SkipGramConfig {
        SkipGramConfig {
            dim: self.embedding_dim,
            window: self.window,
            negatives: self.negatives,
            epochs: self.embedding_epochs,
            learning_rate: self.embedding_learning_rate,
            min_count: self.min_count,
            seed: self.seed,
        }
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            node: NodeInitConfig {
                c: self.embedding_dim,
                m: self.max_tokens,
                a: self.heads,
                z: self.hidden,
                ..NodeInitConfig::default()
            },
            layers: self.layers,
            rgcn_activation: self.rgcn_activation,
            attention_activation: self.attention_activation,
            seed: self.seed,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            patience: self.patience,
            max_epochs: self.max_epochs,
            validation_fraction: self.validation_fraction,
            seed: self.seed,
            balanced: self.balanced,
        }
    }
}
