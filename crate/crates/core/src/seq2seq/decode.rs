use super::model::{source_mask, Net};
use super::params::ModelParams;
use super::ModelError;
use crate::autograd::{Real, Tape};
use crate::corpus::{decode_output_string, CorpusError, Direction, SequenceLimits, Vocabulary};

/// Examples decoded together by [`Predictor`].
const DECODE_BATCH: usize = 64;

/// Index of the largest value; ties go to the lowest index.
fn argmax<T: Real>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Greedy decoding for a batch of padded sources. Each output excludes the
/// start and end markers; an example that never emits the end marker stops
/// after `max_steps` symbols.
pub fn greedy_decode<T: Real>(
    params: &ModelParams<T>,
    sources: &[&[usize]],
    vocab: &Vocabulary,
    max_steps: usize,
) -> Result<Vec<Vec<usize>>, ModelError> {
    if sources.is_empty() {
        return Ok(Vec::new());
    }
    let v = params.config().vocab_size;
    if let Some(&index) = sources.iter().flat_map(|s| s.iter()).find(|&&i| i >= v) {
        return Err(crate::autograd::AutogradError::IndexOutOfRange { index, bound: v }.into());
    }
    let mut tape = Tape::new();
    let mut net = Net::bind(&mut tape, params, false);
    let enc = net.encode(sources)?;
    let mask = source_mask(sources, vocab.pad());
    let (mut h, mut c) = (enc.h0, enc.c0);
    let mut prev = vec![vocab.start(); sources.len()];
    let mut outputs = vec![Vec::new(); sources.len()];
    let mut done = vec![false; sources.len()];
    for _ in 0..max_steps {
        let (logits, nh, nc, _) = net.step(&enc.memory, &prev, h, c, &mask)?;
        (h, c) = (nh, nc);
        let values = net.tape.value(logits);
        for (b, out) in outputs.iter_mut().enumerate() {
            let next = argmax(values.row(b));
            prev[b] = next;
            if done[b] {
                continue;
            }
            if next == vocab.end() {
                done[b] = true;
            } else {
                out.push(next);
            }
        }
        if done.iter().all(|&d| d) {
            break;
        }
    }
    Ok(outputs)
}

/// A split-direction output parsed at its first `+`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPrediction {
    pub stem: String,
    pub suffix: String,
    /// The output had no `+`; `stem` then holds the whole string.
    pub malformed: bool,
}

pub fn parse_split(output: &str) -> SplitPrediction {
    match output.split_once('+') {
        Some((stem, suffix)) => SplitPrediction { stem: stem.into(), suffix: suffix.into(), malformed: false },
        None => SplitPrediction { stem: output.into(), suffix: String::new(), malformed: true },
    }
}

/// Batched inference over raw strings for one trained direction.
#[derive(Debug, Clone)]
pub struct Predictor<'a, T: Real = f32> {
    pub params: &'a ModelParams<T>,
    pub vocab: &'a Vocabulary,
    pub direction: Direction,
}

impl<'a, T: Real> Predictor<'a, T> {
    pub fn new(params: &'a ModelParams<T>, vocab: &'a Vocabulary, direction: Direction) -> Self {
        Self { params, vocab, direction }
    }

    fn limits(&self) -> SequenceLimits {
        self.params.config().limits()
    }

    /// Source indices for one input, padded to `source_max`.
    pub fn encode_input(&self, input: &str) -> Result<Vec<usize>, CorpusError> {
        let limits = self.limits();
        let len = input.chars().count();
        if len > limits.source_max {
            return Err(CorpusError::LengthOverflow { field: "source", len, max: limits.source_max });
        }
        let mut out = Vec::with_capacity(limits.source_max);
        for c in input.chars() {
            let allowed = match c {
                '&' | '$' | '*' => false,
                '+' => self.direction == Direction::Formation,
                _ => true,
            };
            if !allowed {
                return Err(CorpusError::UnknownCharacter(c));
            }
            out.push(self.vocab.index(c)?);
        }
        out.resize(limits.source_max, self.vocab.pad());
        Ok(out)
    }

    /// Decoded output string per input. Inputs that cannot be encoded get
    /// their own error without affecting the rest.
    pub fn predict(&self, inputs: &[&str]) -> Result<Vec<Result<String, CorpusError>>, ModelError> {
        let mut results: Vec<Result<String, CorpusError>> = Vec::with_capacity(inputs.len());
        let mut pending: Vec<(usize, Vec<usize>)> = Vec::new();
        for (i, input) in inputs.iter().enumerate() {
            match self.encode_input(input) {
                Ok(src) => {
                    results.push(Ok(String::new()));
                    pending.push((i, src));
                }
                Err(e) => results.push(Err(e)),
            }
        }
        let max_steps = self.limits().target_len();
        for chunk in pending.chunks(DECODE_BATCH) {
            let sources: Vec<&[usize]> = chunk.iter().map(|(_, s)| s.as_slice()).collect();
            let decoded = greedy_decode(self.params, &sources, self.vocab, max_steps)?;
            for ((i, _), out) in chunk.iter().zip(decoded) {
                results[*i] = Ok(decode_output_string(&out, self.vocab));
            }
        }
        Ok(results)
    }

    pub fn predict_one(&self, input: &str) -> Result<String, ModelError> {
        let mut out = self.predict(&[input])?;
        Ok(out.pop().expect("one result per input")?)
    }
}

/// Pada predicted for `stem+suffix` by a formation model.
pub fn predict_formation<T: Real>(
    params: &ModelParams<T>,
    stem: &str,
    suffix: &str,
    vocab: &Vocabulary,
) -> Result<String, ModelError> {
    Predictor::new(params, vocab, Direction::Formation).predict_one(&format!("{stem}+{suffix}"))
}

/// (stem, suffix) predicted for `pada` by a split model.
pub fn predict_split<T: Real>(
    params: &ModelParams<T>,
    pada: &str,
    vocab: &Vocabulary,
) -> Result<SplitPrediction, ModelError> {
    let out = Predictor::new(params, vocab, Direction::Split).predict_one(pada)?;
    Ok(parse_split(&out))
}
