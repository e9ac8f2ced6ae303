//! Fixtures shared by the benchmarks.

use pratyaya::corpus::{DerivationRecord, Direction, EncodedPair, SequenceLimits, SuffixCategory, Vocabulary};
use pratyaya::seq2seq::{ModelConfig, ModelParams};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEM_CHARS: &[char] = &['k', 't', 'p', 'n', 'm', 'r', 's', 'd', 'a', 'i', 'u', 'A', 'I', 'U', 'o'];
const SUFFIXES: &[&str] = &["tavya", "anIya", "ana", "tf", "in", "ika"];

/// Random records shaped like the real corpus.
pub fn records(n: usize, seed: u64) -> Vec<DerivationRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(2..7);
            let stem: String = (0..len).map(|_| *STEM_CHARS.choose(&mut rng).unwrap()).collect();
            let suffix = *SUFFIXES.choose(&mut rng).unwrap();
            let pada = format!("{stem}{suffix}m");
            DerivationRecord::new(&stem, suffix, &pada, SuffixCategory::Krit)
        })
        .collect()
}

pub struct Fixture {
    pub records: Vec<DerivationRecord>,
    pub vocab: Vocabulary,
    pub config: ModelConfig,
    pub params: ModelParams<f32>,
    pub pairs: Vec<EncodedPair>,
}

pub fn fixture(n: usize, latent: usize) -> Fixture {
    let records = records(n, 0);
    let vocab = Vocabulary::build(&records).unwrap();
    let limits = SequenceLimits::fit(&records, Direction::Formation);
    let config = ModelConfig::new(latent, vocab.len(), limits.source_max, limits.target_max);
    let params = ModelParams::init(&config, 0.05, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let pairs = records
        .iter()
        .map(|r| pratyaya::corpus::encode_pair(r, &vocab, limits, Direction::Formation).unwrap())
        .collect();
    Fixture { records, vocab, config, params, pairs }
}
