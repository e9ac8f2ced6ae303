//! ITRANS <-> SLP1 transliteration.
//!
//! SLP1 spells every Sanskrit phoneme with exactly one ASCII character, which
//! is what the character-level model consumes. Raw corpora arrive in ITRANS,
//! where many phonemes take two to four characters ("Th", "sh", "RRi"), so the
//! ITRANS side is tokenized by greedy longest match against a mapping table.
//!
//! The table is a plain TSV shipped in `data/itrans_slp1.tsv`. Several ITRANS
//! spellings may map to one SLP1 character; the first one listed is the
//! canonical spelling emitted in the SLP1 -> ITRANS direction. When two
//! canonical spellings would fuse into a longer token on re-reading (SLP1 `ai`
//! written as ITRANS `ai` reads back as `E`), an `_` separator is emitted
//! between them. The separator is skipped on input.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use thiserror::Error;

/// Control characters used in encoded sequences: concatenation, start,
/// end, and padding markers.
pub const CONTROL_CHARS: [char; 4] = ['+', '&', '$', '*'];

/// Zero-width ITRANS separator that breaks up tokens which would otherwise fuse.
pub const ITRANS_SEPARATOR: char = '_';

const DEFAULT_TABLE: &str = include_str!("../data/itrans_slp1.tsv");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TranslitError {
    #[error("no ITRANS token matches at position {position} (found {found:?})")]
    UnknownToken { position: usize, found: char },
    #[error("invalid SLP1 character {found:?} at position {position}")]
    InvalidSlp1Char { position: usize, found: char },
    #[error("table line {line}: {reason}")]
    Table { line: usize, reason: String },
    #[error("cannot read table: {0}")]
    Io(String),
}

/// One offending character reported by [`validate_slp1`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub position: usize,
    pub found: char,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}", self.found, self.position)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableEntry {
    pub itrans: String,
    pub slp1: char,
}

/// Frozen ITRANS/SLP1 mapping.
#[derive(Debug, Clone)]
pub struct TransliterationTable {
    entries: Vec<TableEntry>,
    by_itrans: HashMap<String, char>,
    canonical: HashMap<char, String>,
    longest: usize,
}

impl TransliterationTable {
    /// Parses the `itrans<TAB>slp1` format. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, TranslitError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: &str| TranslitError::Table { line: i + 1, reason: reason.to_string() };
            let (itrans, slp1) = line.split_once('\t').ok_or_else(|| err("expected two tab-separated fields"))?;
            let mut chars = slp1.chars();
            let slp1 = match (chars.next(), chars.next()) {
                (Some(c), None) => c,
                _ => return Err(err("SLP1 side must be a single character")),
            };
            if itrans.is_empty() || itrans.contains(ITRANS_SEPARATOR) || itrans.chars().any(char::is_whitespace) {
                return Err(err("ITRANS token must be non-empty without whitespace or '_'"));
            }
            if CONTROL_CHARS.contains(&slp1) {
                return Err(err("control characters cannot be mapped"));
            }
            entries.push(TableEntry { itrans: itrans.to_string(), slp1 });
        }
        Self::from_entries(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TranslitError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| TranslitError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    pub fn from_entries(entries: Vec<TableEntry>) -> Result<Self, TranslitError> {
        let mut by_itrans = HashMap::new();
        let mut canonical = HashMap::new();
        let mut longest = 0;
        for (i, e) in entries.iter().enumerate() {
            if by_itrans.insert(e.itrans.clone(), e.slp1).is_some() {
                return Err(TranslitError::Table {
                    line: i + 1,
                    reason: format!("duplicate ITRANS token {:?}", e.itrans),
                });
            }
            canonical.entry(e.slp1).or_insert_with(|| e.itrans.clone());
            longest = longest.max(e.itrans.chars().count());
        }
        Ok(Self { entries, by_itrans, canonical, longest })
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    /// Length in characters of the longest ITRANS token.
    pub fn longest_match(&self) -> usize {
        self.longest
    }

    /// Every SLP1 character the table can produce.
    pub fn slp1_alphabet(&self) -> BTreeSet<char> {
        self.canonical.keys().copied().collect()
    }

    pub fn canonical_itrans(&self, c: char) -> Option<&str> {
        self.canonical.get(&c).map(String::as_str)
    }

    /// Longest table token that is a prefix of `chars`, with its length.
    fn longest_prefix(&self, chars: &[char]) -> Option<(usize, char)> {
        let max = self.longest.min(chars.len());
        (1..=max).rev().find_map(|len| {
            let key: String = chars[..len].iter().collect();
            self.by_itrans.get(&key).map(|&c| (len, c))
        })
    }

    pub fn itrans_to_slp1(&self, input: &str) -> Result<String, TranslitError> {
        let chars: Vec<char> = input.chars().collect();
        let mut out = String::with_capacity(chars.len());
        let mut pos = 0;
        while pos < chars.len() {
            if chars[pos] == ITRANS_SEPARATOR {
                pos += 1;
                continue;
            }
            match self.longest_prefix(&chars[pos..]) {
                Some((len, c)) => {
                    out.push(c);
                    pos += len;
                }
                None => return Err(TranslitError::UnknownToken { position: pos, found: chars[pos] }),
            }
        }
        Ok(out)
    }

    pub fn slp1_to_itrans(&self, input: &str) -> Result<String, TranslitError> {
        let mut tokens = Vec::new();
        for (position, c) in input.chars().enumerate() {
            match self.canonical.get(&c) {
                Some(tok) => tokens.push(tok.as_str()),
                None => return Err(TranslitError::InvalidSlp1Char { position, found: c }),
            }
        }
        // Build right to left so the greedy reader's view of everything after
        // the current token is already final.
        let mut tail: Vec<char> = Vec::new();
        for tok in tokens.iter().rev() {
            let tok_chars: Vec<char> = tok.chars().collect();
            let mut candidate = tok_chars.clone();
            candidate.extend(tail.iter().take(self.longest));
            let fused = self.longest_prefix(&candidate).map(|(len, _)| len) != Some(tok_chars.len());
            let mut next = tok_chars;
            if fused {
                next.push(ITRANS_SEPARATOR);
            }
            next.extend(tail);
            tail = next;
        }
        Ok(tail.into_iter().collect())
    }
}

impl Default for TransliterationTable {
    fn default() -> Self {
        default_table().clone()
    }
}

/// The bundled standard table, parsed once.
pub fn default_table() -> &'static TransliterationTable {
    static TABLE: OnceLock<TransliterationTable> = OnceLock::new();
    TABLE.get_or_init(|| TransliterationTable::parse(DEFAULT_TABLE).expect("bundled table is valid"))
}

/// Converts ITRANS to SLP1 with the bundled table.
pub fn itrans_to_slp1(input: &str) -> Result<String, TranslitError> {
    default_table().itrans_to_slp1(input)
}

/// Converts SLP1 to canonical ITRANS with the bundled table.
pub fn slp1_to_itrans(input: &str) -> Result<String, TranslitError> {
    default_table().slp1_to_itrans(input)
}

pub fn is_slp1_char(c: char) -> bool {
    default_table().canonical.contains_key(&c)
}

/// Lists every character outside the SLP1 alphabet (plus the control
/// characters when `allow_control` is set). Never fails.
pub fn validate_slp1(input: &str, allow_control: bool) -> Vec<Violation> {
    input
        .chars()
        .enumerate()
        .filter(|&(_, c)| !(is_slp1_char(c) || (allow_control && CONTROL_CHARS.contains(&c))))
        .map(|(position, found)| Violation { position, found })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn itrans_examples() {
        assert_eq!(itrans_to_slp1("paTh").unwrap(), "paW");
        assert_eq!(itrans_to_slp1("a").unwrap(), "a");
        assert_eq!(itrans_to_slp1("shiva").unwrap(), "Siva");
        assert_eq!(itrans_to_slp1("aindra").unwrap(), "Endra");
        assert_eq!(itrans_to_slp1("kRRiShNa").unwrap(), "kfzRa");
        assert_eq!(itrans_to_slp1("").unwrap(), "");
    }

    #[test]
    fn slp1_examples() {
        assert_eq!(slp1_to_itrans("paW").unwrap(), "paTh");
        assert_eq!(slp1_to_itrans("a").unwrap(), "a");
        assert_eq!(slp1_to_itrans("Endra").unwrap(), "aindra");
        assert_eq!(slp1_to_itrans("tolanam").unwrap(), "tolanam");
    }

    #[test]
    fn aliases_normalize_to_canonical() {
        assert_eq!(itrans_to_slp1("R^i").unwrap(), itrans_to_slp1("RRi").unwrap());
        assert_eq!(slp1_to_itrans(&itrans_to_slp1("R^ik").unwrap()).unwrap(), "RRik");
        assert_eq!(slp1_to_itrans(&itrans_to_slp1("rAma").unwrap()).unwrap(), "raama");
    }

    #[test]
    fn separator_breaks_fusing_tokens() {
        // a + i is hiatus, not the diphthong ai
        assert_eq!(slp1_to_itrans("ai").unwrap(), "a_i");
        assert_eq!(itrans_to_slp1("a_i").unwrap(), "ai");
        assert_eq!(slp1_to_itrans("kh").unwrap(), "k_h");
        assert_eq!(slp1_to_itrans("aA").unwrap(), "a_aa");
        for s in ["ai", "au", "kh", "th", "sh", "aA", "Sh", "ch", "Lx", "jY"] {
            assert_eq!(itrans_to_slp1(&slp1_to_itrans(s).unwrap()).unwrap(), s);
        }
    }

    #[test]
    fn unknown_token_reports_position() {
        assert_eq!(itrans_to_slp1("paq").unwrap_err(), TranslitError::UnknownToken { position: 2, found: 'q' });
        assert_eq!(itrans_to_slp1("R").unwrap_err(), TranslitError::UnknownToken { position: 0, found: 'R' });
    }

    #[test]
    fn invalid_slp1_reports_position() {
        assert_eq!(slp1_to_itrans("ta+").unwrap_err(), TranslitError::InvalidSlp1Char { position: 2, found: '+' });
    }

    #[test]
    fn validation_examples() {
        assert!(validate_slp1("tolanam", false).is_empty());
        assert!(validate_slp1("", false).is_empty());
        assert_eq!(validate_slp1("tul+lyuw", false), vec![Violation { position: 3, found: '+' }]);
        assert!(validate_slp1("&tul+lyuw$**", true).is_empty());
        assert!(validate_slp1("Satf~", false).is_empty());
        assert_eq!(validate_slp1("x1", false), vec![Violation { position: 1, found: '1' }]);
    }

    #[test]
    fn table_is_injective_on_canonical_spellings() {
        let t = default_table();
        let mut seen = std::collections::HashSet::new();
        for c in t.slp1_alphabet() {
            assert!(seen.insert(t.canonical_itrans(c).unwrap().to_string()));
        }
        assert_eq!(t.longest_match(), 3);
    }

    #[test]
    fn malformed_table_lines() {
        assert!(matches!(TransliterationTable::parse("a\taa\n"), Err(TranslitError::Table { line: 1, .. })));
        assert!(matches!(TransliterationTable::parse("# c\nab\n"), Err(TranslitError::Table { line: 2, .. })));
        assert!(matches!(TransliterationTable::parse("a\ta\na\tA\n"), Err(TranslitError::Table { .. })));
    }

    fn slp1_string() -> impl Strategy<Value = String> {
        let alphabet: Vec<char> = default_table().slp1_alphabet().into_iter().collect();
        proptest::collection::vec(proptest::sample::select(alphabet), 0..24).prop_map(|v| v.into_iter().collect())
    }

    proptest! {
        #[test]
        fn slp1_round_trip(s in slp1_string()) {
            let itrans = slp1_to_itrans(&s).unwrap();
            prop_assert_eq!(itrans_to_slp1(&itrans).unwrap(), s);
        }

        #[test]
        fn validation_is_total(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let s = String::from_utf8_lossy(&bytes);
            let v = validate_slp1(&s, true);
            prop_assert!(v.len() <= s.chars().count());
        }

        #[test]
        fn itrans_normalization_is_idempotent(s in slp1_string()) {
            let once = slp1_to_itrans(&s).unwrap();
            let twice = slp1_to_itrans(&itrans_to_slp1(&once).unwrap()).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
