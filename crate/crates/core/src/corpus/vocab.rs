use std::collections::{BTreeSet, HashMap};

use super::{CorpusError, DerivationRecord};
use crate::translit::CONTROL_CHARS;

pub const JOIN: char = '+';
pub const START: char = '&';
pub const END: char = '$';
pub const PAD: char = '*';

/// Shared source/target character table. Indices follow codepoint order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    index_to_char: Vec<char>,
    char_to_index: HashMap<char, usize>,
}

impl Vocabulary {
    /// Sorted distinct characters of every stem, suffix and pada, plus the
    /// four control characters.
    pub fn build(records: &[DerivationRecord]) -> Result<Self, CorpusError> {
        if records.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let mut chars: BTreeSet<char> = CONTROL_CHARS.into_iter().collect();
        for r in records {
            chars.extend(r.stem.chars().chain(r.suffix.chars()).chain(r.pada.chars()));
        }
        Self::from_chars(chars)
    }

    /// Rebuilds a vocabulary from its characters in index order.
    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Result<Self, CorpusError> {
        let index_to_char: Vec<char> = chars.into_iter().collect();
        let mut char_to_index = HashMap::with_capacity(index_to_char.len());
        for (i, &c) in index_to_char.iter().enumerate() {
            if char_to_index.insert(c, i).is_some() {
                return Err(CorpusError::InvalidVocabulary(format!("duplicate character {c:?}")));
            }
        }
        for c in CONTROL_CHARS {
            if !char_to_index.contains_key(&c) {
                return Err(CorpusError::InvalidVocabulary(format!("missing control character {c:?}")));
            }
        }
        Ok(Self { index_to_char, char_to_index })
    }

    pub fn len(&self) -> usize {
        self.index_to_char.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_to_char.is_empty()
    }

    pub fn index(&self, c: char) -> Result<usize, CorpusError> {
        self.char_to_index.get(&c).copied().ok_or(CorpusError::UnknownCharacter(c))
    }

    pub fn char_at(&self, index: usize) -> Option<char> {
        self.index_to_char.get(index).copied()
    }

    pub fn chars(&self) -> &[char] {
        &self.index_to_char
    }

    pub fn pad(&self) -> usize {
        self.char_to_index[&PAD]
    }

    pub fn start(&self) -> usize {
        self.char_to_index[&START]
    }

    pub fn end(&self) -> usize {
        self.char_to_index[&END]
    }

    pub fn join(&self) -> usize {
        self.char_to_index[&JOIN]
    }

    pub fn encode_str(&self, s: &str) -> Result<Vec<usize>, CorpusError> {
        s.chars().map(|c| self.index(c)).collect()
    }

    /// Checks every character of `s` without allocating indices.
    pub fn check(&self, s: &str) -> Result<(), CorpusError> {
        s.chars().try_for_each(|c| self.index(c).map(|_| ()))
    }
}
