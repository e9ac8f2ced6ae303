//! Synthetic derivation data with known ground truth.
#![allow(dead_code)]

use std::collections::HashSet;

use pratyaya::corpus::{DerivationRecord, SuffixCategory};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const VOWEL_SUFFIXES: [&str; 8] = ["ika", "iman", "ana", "uka", "Ara", "ita", "uza", "ASa"];
pub const CONSONANT_SUFFIXES: [&str; 12] =
    ["tavya", "tf", "mat", "vat", "tva", "Tal", "kam", "nI", "ruh", "sas", "Daka", "pin"];

const CONSONANTS: [char; 15] = ['k', 't', 'p', 'n', 'm', 'r', 's', 'd', 'b', 'g', 'l', 'v', 'j', 'c', 'h'];
const VOWELS: [char; 7] = ['a', 'i', 'u', 'A', 'I', 'U', 'o'];

pub fn suffixes() -> Vec<&'static str> {
    VOWEL_SUFFIXES.iter().chain(&CONSONANT_SUFFIXES).copied().collect()
}

fn is_vowel(c: char) -> bool {
    "aiuAIUoe".contains(c)
}

/// The pada of `stem` + `suffix`: plain concatenation, except that a
/// stem-final `a` and suffix-initial `i` fuse to `e`, and a stem-final `i`
/// before any vowel becomes `y`.
pub fn derive(stem: &str, suffix: &str) -> String {
    let s_last = stem.chars().last();
    let x_first = suffix.chars().next();
    match (s_last, x_first) {
        (Some('a'), Some('i')) => format!("{}e{}", &stem[..stem.len() - 1], &suffix[1..]),
        (Some('i'), Some(v)) if is_vowel(v) => format!("{}y{}", &stem[..stem.len() - 1], suffix),
        _ => format!("{stem}{suffix}"),
    }
}

fn random_stem(rng: &mut impl Rng) -> String {
    let syllables = rng.random_range(1..=3);
    let mut s = String::new();
    for _ in 0..syllables {
        s.push(*CONSONANTS.choose(rng).unwrap());
        s.push(*VOWELS.choose(rng).unwrap());
    }
    if rng.random_bool(0.4) {
        s.push(*CONSONANTS.choose(rng).unwrap());
    }
    s
}

/// `n` distinct tuples in which no two share a pada, so both directions
/// are functions on the data.
pub fn generate(n: usize, seed: u64) -> Vec<DerivationRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let suffixes = suffixes();
    let mut seen = HashSet::new();
    let mut padas = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let stem = random_stem(&mut rng);
        let suffix = *suffixes.choose(&mut rng).unwrap();
        if !seen.insert((stem.clone(), suffix)) {
            continue;
        }
        let pada = derive(&stem, suffix);
        if !padas.insert(pada.clone()) {
            continue;
        }
        out.push(DerivationRecord::new(&stem, suffix, &pada, SuffixCategory::Krit));
    }
    out
}
