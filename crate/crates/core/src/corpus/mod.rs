//! Derivation corpora: loading, filtering, splitting and per-suffix statistics.
//!
//! A corpus is a UTF-8 TSV file with one derivation per line:
//!
//! ```text
//! # stem  suffix  pada     category
//! tul     lyuw    tolanam  krit
//! Indra   aR      Endra    taddhit
//! ```
//!
//! All strings are SLP1. Blank lines and lines starting with `#` are skipped.

mod encode;
mod vocab;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::translit::validate_slp1;

pub use encode::{
    decode_output_string, encode_formation_pair, encode_pair, encode_split_pair, Direction, EncodedPair, SequenceLimits,
};
pub use vocab::Vocabulary;

/// Krit suffixes left out of the default Kridanta experiments because
/// they are under-represented.
pub const DEFAULT_EXCLUDED_SUFFIXES: [&str; 2] = ["Satf~", "SAnac"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: invalid {field}: {reason}")]
    Validation { line: usize, field: &'static str, reason: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("split fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("character {0:?} is not in the vocabulary")]
    UnknownCharacter(char),
    #[error("{field} has length {len}, limit is {max}")]
    LengthOverflow { field: &'static str, len: usize, max: usize },
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuffixCategory {
    Krit,
    Taddhit,
}

impl SuffixCategory {
    pub const ALL: [SuffixCategory; 2] = [SuffixCategory::Krit, SuffixCategory::Taddhit];

    pub fn as_str(self) -> &'static str {
        match self {
            SuffixCategory::Krit => "krit",
            SuffixCategory::Taddhit => "taddhit",
        }
    }
}

impl fmt::Display for SuffixCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuffixCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "krit" => Ok(SuffixCategory::Krit),
            "taddhit" => Ok(SuffixCategory::Taddhit),
            other => Err(format!("unknown category {other:?} (expected krit or taddhit)")),
        }
    }
}

/// One (stem, suffix, pada) derivation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DerivationRecord {
    pub stem: String,
    pub suffix: String,
    pub pada: String,
    pub category: SuffixCategory,
}

impl DerivationRecord {
    pub fn new(stem: &str, suffix: &str, pada: &str, category: SuffixCategory) -> Self {
        Self { stem: stem.to_string(), suffix: suffix.to_string(), pada: pada.to_string(), category }
    }

    /// The `stem+suffix` form used as formation input and split output.
    pub fn joined(&self) -> String {
        format!("{}+{}", self.stem, self.suffix)
    }

    fn validate(&self, line: usize) -> Result<(), CorpusError> {
        for (field, value) in [("stem", &self.stem), ("suffix", &self.suffix), ("pada", &self.pada)] {
            if value.is_empty() {
                return Err(CorpusError::Validation { line, field, reason: "empty".into() });
            }
            if let Some(v) = validate_slp1(value, false).first() {
                return Err(CorpusError::Validation { line, field, reason: format!("non-SLP1 character {v}") });
            }
        }
        Ok(())
    }
}

pub fn parse_corpus(text: &str) -> Result<Vec<DerivationRecord>, CorpusError> {
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(CorpusError::Parse {
                line,
                reason: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let category = fields[3].parse().map_err(|reason| CorpusError::Parse { line, reason })?;
        let record = DerivationRecord::new(fields[0], fields[1], fields[2], category);
        record.validate(line)?;
        records.push(record);
    }
    Ok(records)
}

/// Reads every record of a corpus TSV, in file order.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<DerivationRecord>, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CorpusError::Io { path: path.display().to_string(), reason: e.to_string() })?;
    parse_corpus(&text)
}

/// Drops records whose suffix is in `excluded`.
pub fn filter_suffixes<S: AsRef<str>>(records: Vec<DerivationRecord>, excluded: &[S]) -> Vec<DerivationRecord> {
    if excluded.is_empty() {
        return records;
    }
    records.into_iter().filter(|r| !excluded.iter().any(|e| e.as_ref() == r.suffix)).collect()
}

/// [`filter_suffixes`] with the default krit exclusions.
pub fn filter_krit_suffixes(records: Vec<DerivationRecord>) -> Vec<DerivationRecord> {
    filter_suffixes(records, &DEFAULT_EXCLUDED_SUFFIXES)
}

pub fn filter_category(records: Vec<DerivationRecord>, category: SuffixCategory) -> Vec<DerivationRecord> {
    records.into_iter().filter(|r| r.category == category).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<DerivationRecord>,
    pub test: Vec<DerivationRecord>,
    pub seed: u64,
    pub fraction: f64,
}

/// Number of training records for `n` records at `fraction`, rounded half up.
pub fn train_size(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction) + 0.5).floor().min(n as f64) as usize
}

/// Shuffles a permutation of `0..n` with ChaCha8 seeded from `seed`
/// (Fisher-Yates as implemented by `rand`'s `SliceRandom::shuffle`).
pub fn seeded_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Deterministic shuffle-then-partition into train and test.
pub fn make_split(records: &[DerivationRecord], fraction: f64, seed: u64) -> Result<CorpusSplit, CorpusError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(fraction));
    }
    if records.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let order = seeded_permutation(records.len(), seed);
    let cut = train_size(records.len(), fraction);
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    Ok(CorpusSplit { train: pick(&order[..cut]), test: pick(&order[cut..]), seed, fraction })
}

/// Per-suffix record counts, grouped by category in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusStats {
    pub rows: Vec<(SuffixCategory, String, usize)>,
    pub duplicates: usize,
}

impl CorpusStats {
    pub fn count(&self, suffix: &str) -> Option<usize> {
        self.rows.iter().find(|(_, s, _)| s == suffix).map(|r| r.2)
    }

    pub fn total(&self, category: SuffixCategory) -> usize {
        self.rows.iter().filter(|r| r.0 == category).map(|r| r.2).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Aligned human-readable table.
    pub fn render_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.1.chars().count()).max().unwrap_or(0).max(6);
        let mut out = String::new();
        for category in SuffixCategory::ALL {
            let rows: Vec<_> = self.rows.iter().filter(|r| r.0 == category).collect();
            if rows.is_empty() {
                continue;
            }
            out.push_str(&format!("{category} suffixes\n"));
            for (_, suffix, count) in rows {
                out.push_str(&format!("  {suffix:<width$}  {count:>6}\n"));
            }
        }
        for category in SuffixCategory::ALL {
            out.push_str(&format!("total {category} {}\n", self.total(category)));
        }
        out.push_str(&format!("duplicates {}\n", self.duplicates));
        out
    }

    /// `key=value` lines: `<category>.<suffix>=<count>`, `total.<category>=<count>`.
    pub fn render_kv(&self) -> String {
        let mut out = String::new();
        for (category, suffix, count) in &self.rows {
            out.push_str(&format!("{category}.{suffix}={count}\n"));
        }
        for category in SuffixCategory::ALL {
            out.push_str(&format!("total.{category}={}\n", self.total(category)));
        }
        out.push_str(&format!("duplicates={}\n", self.duplicates));
        out
    }
}

pub fn corpus_stats(records: &[DerivationRecord]) -> CorpusStats {
    let mut rows: Vec<(SuffixCategory, String, usize)> = Vec::new();
    let mut index: HashMap<(SuffixCategory, &str), usize> = HashMap::new();
    let mut seen = BTreeSet::new();
    let mut duplicates = 0;
    for r in records {
        if !seen.insert((&r.stem, &r.suffix, &r.pada, r.category)) {
            duplicates += 1;
        }
        match index.get(&(r.category, r.suffix.as_str())) {
            Some(&i) => rows[i].2 += 1,
            None => {
                index.insert((r.category, r.suffix.as_str()), rows.len());
                rows.push((r.category, r.suffix.clone(), 1));
            }
        }
    }
    rows.sort_by_key(|r| r.0);
    CorpusStats { rows, duplicates }
}
