//! Character-level encoder-decoder: bidirectional LSTM encoder over one-hot
//! characters, additive attention, and an LSTM decoder.
//!
//! Batches are laid out row-per-example. Encoder outputs of a batch are kept
//! position-major as one `[S·B, 2H]` matrix so attention scores for every
//! source position come out of a single product.

mod checkpoint;
mod decode;
mod model;
mod params;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autograd::{AdamConfig, AutogradError};
use crate::corpus::{CorpusError, SequenceLimits};

pub use checkpoint::{Checkpoint, CheckpointMetadata, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use decode::{greedy_decode, parse_split, predict_formation, predict_split, Predictor, SplitPrediction};
pub use model::{
    attention_context, decoder_step, encode_sequence, forward_teacher_forced, LstmState, StepOutput, TeacherForced,
};
pub use params::{ModelParams, Param};
pub use train::{train, EpochStats, TrainOutcome, TrainingHistory};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Autograd(#[from] AutogradError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("need at least {needed} training records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionKind {
    Additive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub latent_dim: usize,
    pub vocab_size: usize,
    pub source_max: usize,
    pub target_max: usize,
    pub attention: AttentionKind,
}

impl ModelConfig {
    pub fn new(latent_dim: usize, vocab_size: usize, source_max: usize, target_max: usize) -> Self {
        Self { latent_dim, vocab_size, source_max, target_max, attention: AttentionKind::Additive }
    }

    pub fn limits(&self) -> SequenceLimits {
        SequenceLimits { source_max: self.source_max, target_max: self.target_max }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.latent_dim == 0 {
            return Err(ModelError::Config("latent_dim must be positive".into()));
        }
        if self.vocab_size < 5 {
            return Err(ModelError::Config(format!("vocab_size must be at least 5, got {}", self.vocab_size)));
        }
        if self.source_max == 0 {
            return Err(ModelError::Config("source_max must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Share of the training records held out for model selection.
    pub validation_fraction: f64,
    pub init_scale: f64,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 70,
            seed: 0,
            adam: AdamConfig::default(),
            validation_fraction: 0.1,
            init_scale: 0.05,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(ModelError::Config("batch_size and epochs must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(ModelError::Config(format!("validation_fraction {} not in [0, 1)", self.validation_fraction)));
        }
        if self.init_scale.is_nan() || self.init_scale <= 0.0 {
            return Err(ModelError::Config("init_scale must be positive".into()));
        }
        Ok(())
    }
}
