//! Run configuration: defaults, then a flat `key = value` file, then flags.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pratyaya::autograd::AdamConfig;
use pratyaya::corpus::{Direction, SuffixCategory, DEFAULT_EXCLUDED_SUFFIXES};
use pratyaya::eval::CharAlignment;
use pratyaya::seq2seq::TrainConfig;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{path}:{line}: {reason}")]
    Syntax { path: String, line: usize, reason: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("cannot read config file {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{0} is required")]
    Missing(&'static str),
}

/// Every setting a command may read. Split parameters stay `None` until set
/// so `evaluate` can tell a request apart from a default.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    /// Restrict to one category; `None` keeps both.
    pub category: Option<SuffixCategory>,
    /// `None` means the default exclusions for krit and none for taddhit.
    pub exclude: Option<Vec<String>>,
    pub direction: Direction,
    pub split_fraction: Option<f64>,
    pub split_seed: Option<u64>,
    pub seed: u64,
    pub latent_dim: usize,
    /// Pinned encoder and decoder lengths; fitted to the corpus when unset.
    pub source_max: Option<usize>,
    pub target_max: Option<usize>,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub validation_fraction: f64,
    pub init_scale: f64,
    pub patience: Option<usize>,
    pub checkpoint: PathBuf,
    pub history: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub report_tsv: Option<PathBuf>,
    pub char_alignment: CharAlignment,
    pub min_accuracy: Option<f64>,
    pub model_name: String,
}

pub const DEFAULT_SPLIT_FRACTION: f64 = 0.8;
pub const DEFAULT_SPLIT_SEED: u64 = 0;

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let adam = AdamConfig::default();
        Self {
            corpus: None,
            category: Some(SuffixCategory::Krit),
            exclude: None,
            direction: Direction::Formation,
            split_fraction: None,
            split_seed: None,
            seed: train.seed,
            latent_dim: 128,
            source_max: None,
            target_max: None,
            batch_size: train.batch_size,
            epochs: train.epochs,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            validation_fraction: train.validation_fraction,
            init_scale: train.init_scale,
            patience: None,
            checkpoint: PathBuf::from("model.ckpt"),
            history: None,
            report: None,
            report_tsv: None,
            char_alignment: CharAlignment::Positional,
            min_accuracy: None,
            model_name: "seq2seq".to_string(),
        }
    }
}

/// Keys accepted in config files and, with `-` for `_`, as flags.
#[cfg(test)]
pub const KEYS: &[&str] = &[
    "corpus",
    "category",
    "exclude",
    "direction",
    "split_fraction",
    "split_seed",
    "seed",
    "latent_dim",
    "source_max",
    "target_max",
    "batch_size",
    "epochs",
    "learning_rate",
    "beta1",
    "beta2",
    "epsilon",
    "validation_fraction",
    "init_scale",
    "patience",
    "checkpoint",
    "history",
    "report",
    "report_tsv",
    "char_alignment",
    "min_accuracy",
    "model_name",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: Display,
{
    match value {
        "" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "corpus" => self.corpus = path(value),
            "category" => {
                self.category = match value {
                    "all" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "exclude" => {
                self.exclude =
                    Some(value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
            }
            "direction" => self.direction = parse(key, value)?,
            "split_fraction" => self.split_fraction = Some(parse(key, value)?),
            "split_seed" => self.split_seed = Some(parse(key, value)?),
            "seed" => self.seed = parse(key, value)?,
            "latent_dim" => self.latent_dim = parse(key, value)?,
            "source_max" => self.source_max = optional(key, value)?,
            "target_max" => self.target_max = optional(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "beta1" => self.beta1 = parse(key, value)?,
            "beta2" => self.beta2 = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "validation_fraction" => self.validation_fraction = parse(key, value)?,
            "init_scale" => self.init_scale = parse(key, value)?,
            "patience" => self.patience = optional(key, value)?,
            "checkpoint" => self.checkpoint = path(value).ok_or(ConfigError::Missing("checkpoint"))?,
            "history" => self.history = path(value),
            "report" => self.report = path(value),
            "report_tsv" => self.report_tsv = path(value),
            "char_alignment" => self.char_alignment = parse(key, value)?,
            "min_accuracy" => self.min_accuracy = optional(key, value)?,
            "model_name" => self.model_name = value.to_string(),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Applies `key = value` lines. Blank lines and lines starting with `#`
    /// are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    path: origin.into(),
                    line: i + 1,
                    reason: "expected key = value".into(),
                });
            };
            self.set(key.trim(), value).map_err(|e| match e {
                ConfigError::UnknownKey(_) | ConfigError::Value { .. } => {
                    ConfigError::Syntax { path: origin.into(), line: i + 1, reason: e.to_string() }
                }
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Defaults, then the file (if any), then each flag in order.
    pub fn resolve(file: Option<&Path>, flags: &[(&str, String)]) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        if let Some(file) = file {
            config.apply_file(file)?;
        }
        for (key, value) in flags {
            config.set(key, value)?;
        }
        Ok(config)
    }

    pub fn corpus_path(&self) -> Result<&Path, ConfigError> {
        self.corpus.as_deref().ok_or(ConfigError::Missing("corpus"))
    }

    pub fn excluded_suffixes(&self) -> Vec<String> {
        match (&self.exclude, self.category) {
            (Some(list), _) => list.clone(),
            (None, Some(SuffixCategory::Taddhit)) => Vec::new(),
            (None, _) => DEFAULT_EXCLUDED_SUFFIXES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn resolved_split(&self) -> (f64, u64) {
        (self.split_fraction.unwrap_or(DEFAULT_SPLIT_FRACTION), self.split_seed.unwrap_or(DEFAULT_SPLIT_SEED))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
            },
            validation_fraction: self.validation_fraction,
            init_scale: self.init_scale,
            patience: self.patience,
        }
    }

    pub fn history_path(&self) -> PathBuf {
        self.history.clone().unwrap_or_else(|| {
            let mut name = self.checkpoint.clone().into_os_string();
            name.push(".history.tsv");
            PathBuf::from(name)
        })
    }
}
