//! Binary checkpoint: magic, version, a JSON header, then raw arrays.
//!
//! ```text
//! 4 bytes   magic "PKSQ"
//! u32 LE    format version
//! u64 LE    header length in bytes
//! header    UTF-8 JSON (config, vocabulary, metadata, array table)
//! arrays    little-endian f32 values, in array-table order
//! ```
//!
//! Array offsets in the header are counted in bytes from the start of the
//! array section.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{ModelParams, Param};
use super::{ModelConfig, ModelError};
use crate::autograd::Tensor;
use crate::corpus::{Direction, SuffixCategory, Vocabulary};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PKSQ";
pub const CHECKPOINT_VERSION: u32 = 1;

/// How a checkpoint was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetadata {
    pub direction: Direction,
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub final_train_loss: Option<f64>,
    pub final_validation_loss: Option<f64>,
    pub split_seed: Option<u64>,
    pub split_fraction: Option<f64>,
    pub category: Option<SuffixCategory>,
    #[serde(default)]
    pub excluded_suffixes: Vec<String>,
    pub corpus_records: Option<usize>,
}

impl CheckpointMetadata {
    pub fn new(direction: Direction) -> Self {
        Self {
            direction,
            seed: 0,
            epochs_run: 0,
            best_epoch: 0,
            final_train_loss: None,
            final_validation_loss: None,
            split_seed: None,
            split_fraction: None,
            category: None,
            excluded_suffixes: Vec::new(),
            corpus_records: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub vocab: Vocabulary,
    pub params: ModelParams<f32>,
    pub metadata: CheckpointMetadata,
}

#[derive(Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    length: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocabulary: String,
    metadata: CheckpointMetadata,
    arrays: Vec<ArrayEntry>,
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn new(vocab: Vocabulary, params: ModelParams<f32>, metadata: CheckpointMetadata) -> Result<Self, ModelError> {
        if vocab.len() != params.config().vocab_size {
            return Err(bad(format!(
                "vocabulary has {} symbols, model expects {}",
                vocab.len(),
                params.config().vocab_size
            )));
        }
        Ok(Self { vocab, params, metadata })
    }

    pub fn config(&self) -> &ModelConfig {
        self.params.config()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut offset = 0;
        let arrays = self
            .params
            .named()
            .map(|(name, t)| {
                let entry = ArrayEntry { name: name.into(), shape: t.shape().to_vec(), offset, length: t.len() };
                offset += 4 * t.len();
                entry
            })
            .collect();
        let header = Header {
            config: self.config().clone(),
            vocabulary: self.vocab.chars().iter().collect(),
            metadata: self.metadata.clone(),
            arrays,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + json.len() + offset);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in self.params.tensors() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        if bytes.len() < 16 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let body = &bytes[16..];
        let header_len =
            usize::try_from(header_len).ok().filter(|&n| n <= body.len()).ok_or_else(|| bad("truncated header"))?;
        let header: Header =
            serde_json::from_slice(&body[..header_len]).map_err(|e| bad(format!("invalid header: {e}")))?;
        let data = &body[header_len..];

        let config = header.config;
        config.validate()?;
        if header.arrays.len() != Param::ALL.len() {
            return Err(bad(format!("expected {} arrays, found {}", Param::ALL.len(), header.arrays.len())));
        }
        let mut tensors = Vec::with_capacity(Param::ALL.len());
        for (p, entry) in Param::ALL.iter().zip(&header.arrays) {
            if entry.name != p.name() {
                return Err(bad(format!("expected array {}, found {}", p.name(), entry.name)));
            }
            let end = entry
                .length
                .checked_mul(4)
                .and_then(|n| n.checked_add(entry.offset))
                .filter(|&end| end <= data.len())
                .ok_or_else(|| bad(format!("array {} runs past end of file", entry.name)))?;
            let values =
                data[entry.offset..end].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
            tensors.push(Tensor::new(&entry.shape, values).map_err(|e| bad(format!("{}: {e}", entry.name)))?);
        }
        let params = ModelParams::from_tensors(&config, tensors)?;
        let vocab = Vocabulary::from_chars(header.vocabulary.chars())?;
        Self::new(vocab, params, header.metadata)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes())
            .map_err(|source| ModelError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let bytes =
            std::fs::read(path).map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
        Self::from_bytes(&bytes)
    }
}
