use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::vocab::{END, PAD, START};
use super::{CorpusError, DerivationRecord, Vocabulary};

/// Task direction: `stem+suffix -> pada` or `pada -> stem+suffix`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Formation,
    Split,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Formation => "formation",
            Direction::Split => "split",
        }
    }

    /// (source text, target text) of a record in this direction.
    pub fn texts(self, record: &DerivationRecord) -> (String, String) {
        match self {
            Direction::Formation => (record.joined(), record.pada.clone()),
            Direction::Split => (record.pada.clone(), record.joined()),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "formation" => Ok(Direction::Formation),
            "split" => Ok(Direction::Split),
            other => Err(format!("unknown direction {other:?} (expected formation or split)")),
        }
    }
}

/// Maximum raw source and target lengths, excluding the start/end markers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceLimits {
    pub source_max: usize,
    pub target_max: usize,
}

impl SequenceLimits {
    /// Smallest limits that fit every record in the given direction.
    pub fn fit(records: &[DerivationRecord], direction: Direction) -> Self {
        let mut limits = SequenceLimits { source_max: 1, target_max: 0 };
        for r in records {
            let joined = r.stem.chars().count() + 1 + r.suffix.chars().count();
            let pada = r.pada.chars().count();
            let (s, t) = match direction {
                Direction::Formation => (joined, pada),
                Direction::Split => (pada, joined),
            };
            limits.source_max = limits.source_max.max(s);
            limits.target_max = limits.target_max.max(t);
        }
        limits
    }

    /// Decoder sequence length including both markers.
    pub fn target_len(&self) -> usize {
        self.target_max + 2
    }
}

/// Index sequences for one example. `source` is padded to `source_max`;
/// `target` is `& ... $` padded to `target_max + 2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPair {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
    pub direction: Direction,
}

impl EncodedPair {
    /// Non-padding flags for the source positions.
    pub fn source_mask(&self, pad: usize) -> Vec<bool> {
        self.source.iter().map(|&i| i != pad).collect()
    }

    /// Number of predicted target symbols, i.e. content plus the end marker.
    pub fn target_steps(&self, pad: usize) -> usize {
        self.target.iter().skip(1).take_while(|&&i| i != pad).count()
    }
}

fn padded(
    text: &str,
    vocab: &Vocabulary,
    max: usize,
    field: &'static str,
    markers: bool,
) -> Result<Vec<usize>, CorpusError> {
    let len = text.chars().count();
    if len > max {
        return Err(CorpusError::LengthOverflow { field, len, max });
    }
    let total = if markers { max + 2 } else { max };
    let mut out = Vec::with_capacity(total);
    if markers {
        out.push(vocab.start());
    }
    for c in text.chars() {
        if matches!(c, START | END | PAD) {
            return Err(CorpusError::UnknownCharacter(c));
        }
        out.push(vocab.index(c)?);
    }
    if markers {
        out.push(vocab.end());
    }
    out.resize(total, vocab.pad());
    Ok(out)
}

pub(crate) fn encode_texts(
    source: &str,
    target: &str,
    vocab: &Vocabulary,
    limits: SequenceLimits,
    direction: Direction,
) -> Result<EncodedPair, CorpusError> {
    Ok(EncodedPair {
        source: padded(source, vocab, limits.source_max, "source", false)?,
        target: padded(target, vocab, limits.target_max, "target", true)?,
        direction,
    })
}

/// Encodes `record` for the given direction.
pub fn encode_pair(
    record: &DerivationRecord,
    vocab: &Vocabulary,
    limits: SequenceLimits,
    direction: Direction,
) -> Result<EncodedPair, CorpusError> {
    let (source, target) = direction.texts(record);
    encode_texts(&source, &target, vocab, limits, direction)
}

/// Source `stem+suffix`, target `&pada$`.
pub fn encode_formation_pair(
    record: &DerivationRecord,
    vocab: &Vocabulary,
    limits: SequenceLimits,
) -> Result<EncodedPair, CorpusError> {
    encode_pair(record, vocab, limits, Direction::Formation)
}

/// Source `pada`, target `&stem+suffix$`.
pub fn encode_split_pair(
    record: &DerivationRecord,
    vocab: &Vocabulary,
    limits: SequenceLimits,
) -> Result<EncodedPair, CorpusError> {
    encode_pair(record, vocab, limits, Direction::Split)
}

/// Drops a leading start marker, stops at the first end marker, and skips
/// padding. Indices outside the vocabulary are skipped as well.
pub fn decode_output_string(indices: &[usize], vocab: &Vocabulary) -> String {
    let body = match indices.first() {
        Some(&i) if vocab.char_at(i) == Some(START) => &indices[1..],
        _ => indices,
    };
    body.iter().filter_map(|&i| vocab.char_at(i)).take_while(|&c| c != END).filter(|&c| c != PAD).collect()
}
