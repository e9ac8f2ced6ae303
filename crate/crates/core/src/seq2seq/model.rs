use super::params::{ModelParams, Param};
use super::{ModelConfig, ModelError};
use crate::autograd::{Real, Tape, Tensor, Var};
use crate::corpus::{EncodedPair, Vocabulary};

/// Hidden and cell state of one LSTM.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<T = f32> {
    pub h: Tensor<T>,
    pub c: Tensor<T>,
}

/// Encoder outputs of a batch as seen by attention, recorded on the tape.
pub(crate) struct Memory {
    /// `[S·B, 2H]`, row `s·B + b` holds position `s` of example `b`.
    pub outputs: Var,
    /// `outputs · W_key`, shared by every decoder step.
    pub keys: Var,
    pub batch: usize,
    pub len: usize,
}

/// Encoder memory plus the bridged decoder start state.
pub(crate) struct Encoded {
    pub memory: Memory,
    pub h0: Var,
    pub c0: Var,
}

/// Network weights bound to a tape.
pub(crate) struct Net<'t, T: Real> {
    pub tape: &'t mut Tape<T>,
    vars: Vec<Var>,
    hidden: usize,
}

impl<'t, T: Real> Net<'t, T> {
    pub fn bind(tape: &'t mut Tape<T>, params: &ModelParams<T>, trainable: bool) -> Self {
        let vars = params
            .tensors()
            .iter()
            .map(|t| if trainable { tape.param(t.clone()) } else { tape.constant(t.clone()) })
            .collect();
        Self { tape, vars, hidden: params.config().latent_dim }
    }

    pub fn from_vars(tape: &'t mut Tape<T>, vars: &[Var], config: &ModelConfig) -> Result<Self, ModelError> {
        if vars.len() != Param::ALL.len() {
            return Err(ModelError::Config(format!("expected {} parameter variables", Param::ALL.len())));
        }
        for (&p, &v) in Param::ALL.iter().zip(vars) {
            if tape.value(v).shape() != p.shape(config).as_slice() {
                return Err(ModelError::Config(format!("{} has the wrong shape", p.name())));
            }
        }
        Ok(Self { tape, vars: vars.to_vec(), hidden: config.latent_dim })
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    fn w(&self, p: Param) -> Var {
        self.vars[p as usize]
    }

    fn zeros(&mut self, batch: usize) -> Var {
        self.tape.constant(Tensor::zeros(&[batch, self.hidden]))
    }

    /// One LSTM step given the already projected input `x_proj` `[B, 4H]`.
    fn lstm(&mut self, x_proj: Var, h: Var, c: Var, recurrent: Param, bias: Param) -> Result<(Var, Var), ModelError> {
        let hd = self.hidden;
        let t = &mut *self.tape;
        let rec = t.matmul(h, self.vars[recurrent as usize])?;
        let gates = t.add(x_proj, rec)?;
        let gates = t.add_row(gates, self.vars[bias as usize])?;
        let i = t.slice_cols(gates, 0, hd)?;
        let f = t.slice_cols(gates, hd, hd)?;
        let g = t.slice_cols(gates, 2 * hd, hd)?;
        let o = t.slice_cols(gates, 3 * hd, hd)?;
        let (i, f, g, o) = (t.sigmoid(i), t.sigmoid(f), t.tanh(g), t.sigmoid(o));
        let keep = t.mul(f, c)?;
        let write = t.mul(i, g)?;
        let c_new = t.add(keep, write)?;
        let squashed = t.tanh(c_new);
        let h_new = t.mul(o, squashed)?;
        Ok((h_new, c_new))
    }

    /// Runs both encoder directions over every position, padding included.
    pub fn encode(&mut self, sources: &[&[usize]]) -> Result<Encoded, ModelError> {
        let batch = sources.len();
        let len = sources.first().map_or(0, |s| s.len());
        if batch == 0 || len == 0 || sources.iter().any(|s| s.len() != len) {
            return Err(ModelError::Config("source batch must be non-empty and rectangular".into()));
        }
        let column = |t: usize| sources.iter().map(|s| s[t]).collect::<Vec<_>>();

        let mut forward = Vec::with_capacity(len);
        let (mut h, mut c) = (self.zeros(batch), self.zeros(batch));
        for t in 0..len {
            let x = self.tape.embed(self.w(Param::EncFwdInput), &column(t))?;
            (h, c) = self.lstm(x, h, c, Param::EncFwdRecurrent, Param::EncFwdBias)?;
            forward.push(h);
        }
        let (fwd_h, fwd_c) = (h, c);

        let mut backward = vec![h; len];
        let (mut h, mut c) = (self.zeros(batch), self.zeros(batch));
        for t in (0..len).rev() {
            let x = self.tape.embed(self.w(Param::EncBwdInput), &column(t))?;
            (h, c) = self.lstm(x, h, c, Param::EncBwdRecurrent, Param::EncBwdBias)?;
            backward[t] = h;
        }
        let (bwd_h, bwd_c) = (h, c);

        let per_position = forward
            .iter()
            .zip(&backward)
            .map(|(&f, &b)| self.tape.concat_cols(&[f, b]))
            .collect::<Result<Vec<_>, _>>()?;
        let outputs = self.tape.concat_rows(&per_position)?;
        let keys = self.tape.matmul(outputs, self.w(Param::AttnKey))?;

        let t = &mut *self.tape;
        let final_h = t.concat_cols(&[fwd_h, bwd_h])?;
        let final_c = t.concat_cols(&[fwd_c, bwd_c])?;
        let h0 = t.matmul(final_h, self.vars[Param::BridgeHidden as usize])?;
        let h0 = t.add_row(h0, self.vars[Param::BridgeHiddenBias as usize])?;
        let c0 = t.matmul(final_c, self.vars[Param::BridgeCell as usize])?;
        let c0 = t.add_row(c0, self.vars[Param::BridgeCellBias as usize])?;
        Ok(Encoded { memory: Memory { outputs, keys, batch, len }, h0, c0 })
    }

    /// Additive attention with `h` `[B, H]` as query. `mask` is `[B·S]`
    /// row-major and marks the non-padding source positions.
    pub fn attend(&mut self, enc: &Memory, h: Var, mask: &[bool]) -> Result<(Var, Var), ModelError> {
        let t = &mut *self.tape;
        let query = t.matmul(h, self.vars[Param::AttnQuery as usize])?;
        let energy = t.add_tiled(enc.keys, query)?;
        let energy = t.tanh(energy);
        let scores = t.matmul(energy, self.vars[Param::AttnScore as usize])?;
        let scores = t.reshape(scores, &[enc.len, enc.batch])?;
        let scores = t.transpose(scores)?;
        let weights = t.masked_softmax(scores, mask)?;
        let context = t.weighted_block_sum(weights, enc.outputs)?;
        Ok((context, weights))
    }

    /// One decoder step: attend with the incoming state, feed
    /// `[one_hot(prev); context]` to the LSTM, project to logits.
    pub fn step(
        &mut self,
        enc: &Memory,
        prev: &[usize],
        h: Var,
        c: Var,
        mask: &[bool],
    ) -> Result<(Var, Var, Var, Var), ModelError> {
        let (context, weights) = self.attend(enc, h, mask)?;
        let t = &mut *self.tape;
        let from_char = t.embed(self.vars[Param::DecChar as usize], prev)?;
        let from_context = t.matmul(context, self.vars[Param::DecContext as usize])?;
        let x = t.add(from_char, from_context)?;
        let (h, c) = self.lstm(x, h, c, Param::DecRecurrent, Param::DecBias)?;
        let t = &mut *self.tape;
        let logits = t.matmul(h, self.vars[Param::OutWeight as usize])?;
        let logits = t.add_row(logits, self.vars[Param::OutBias as usize])?;
        Ok((logits, h, c, weights))
    }

    /// Masked cross-entropy of the gold target given gold prefixes.
    pub fn teacher_forced(&mut self, pairs: &[&EncodedPair], pad: usize) -> Result<TeacherForced, ModelError> {
        let sources: Vec<&[usize]> = pairs.iter().map(|p| p.source.as_slice()).collect();
        let enc = self.encode(&sources)?;
        let mask = source_mask(&sources, pad);
        let steps = pairs.iter().map(|p| p.target_steps(pad)).max().unwrap_or(0);
        let (mut h, mut c) = (enc.h0, enc.c0);
        let mut logits = Vec::with_capacity(steps);
        let mut targets = Vec::with_capacity(steps * pairs.len());
        let mut keep = Vec::with_capacity(steps * pairs.len());
        for t in 0..steps {
            let prev: Vec<usize> = pairs.iter().map(|p| p.target[t]).collect();
            let (l, nh, nc, _) = self.step(&enc.memory, &prev, h, c, &mask)?;
            (h, c) = (nh, nc);
            logits.push(l);
            for p in pairs {
                let next = p.target[t + 1];
                targets.push(next);
                keep.push(next != pad);
            }
        }
        let count = keep.iter().filter(|&&k| k).count();
        let all = self.tape.concat_rows(&logits)?;
        let loss = self.tape.softmax_cross_entropy(all, &targets, &keep)?;
        Ok(TeacherForced { loss, count })
    }
}

pub(crate) fn source_mask(sources: &[&[usize]], pad: usize) -> Vec<bool> {
    sources.iter().flat_map(|s| s.iter().map(move |&i| i != pad)).collect()
}

/// Loss node and number of scored target symbols.
#[derive(Debug, Clone, Copy)]
pub struct TeacherForced {
    pub loss: Var,
    pub count: usize,
}

impl TeacherForced {
    /// Records the teacher-forced loss of `pairs` using parameter variables
    /// already on `tape` (in [`Param::ALL`] order).
    pub fn record<T: Real>(
        tape: &mut Tape<T>,
        vars: &[Var],
        config: &ModelConfig,
        pairs: &[EncodedPair],
        pad: usize,
    ) -> Result<Self, ModelError> {
        let refs: Vec<&EncodedPair> = pairs.iter().collect();
        Net::from_vars(tape, vars, config)?.teacher_forced(&refs, pad)
    }
}

/// Per-character teacher-forced loss of a batch.
pub fn forward_teacher_forced<T: Real>(
    params: &ModelParams<T>,
    pairs: &[EncodedPair],
    vocab: &Vocabulary,
) -> Result<T, ModelError> {
    let mut tape = Tape::new();
    let mut net = Net::bind(&mut tape, params, false);
    let refs: Vec<&EncodedPair> = pairs.iter().collect();
    let out = net.teacher_forced(&refs, vocab.pad())?;
    Ok(tape.value(out.loss).data()[0])
}

fn check_indices(indices: &[usize], config: &ModelConfig) -> Result<(), ModelError> {
    match indices.iter().find(|&&i| i >= config.vocab_size) {
        Some(&index) => Err(crate::autograd::AutogradError::IndexOutOfRange { index, bound: config.vocab_size }.into()),
        None => Ok(()),
    }
}

/// Encoder outputs `[S, 2H]` and the bridged decoder start state for one source.
pub fn encode_sequence<T: Real>(
    params: &ModelParams<T>,
    source: &[usize],
) -> Result<(Tensor<T>, LstmState<T>), ModelError> {
    check_indices(source, params.config())?;
    let h = params.config().latent_dim;
    let mut tape = Tape::new();
    let mut net = Net::bind(&mut tape, params, false);
    let enc = net.encode(&[source])?;
    let state =
        LstmState { h: tape.value(enc.h0).clone().with_shape(&[h]), c: tape.value(enc.c0).clone().with_shape(&[h]) };
    Ok((tape.value(enc.memory.outputs).clone(), state))
}

fn bind_single<T: Real>(net: &mut Net<'_, T>, encoder_outputs: &Tensor<T>) -> Result<Memory, ModelError> {
    let (len, _) = encoder_outputs.dims2();
    let outputs = net.tape.constant(encoder_outputs.clone());
    let keys = net.tape.matmul(outputs, net.w(Param::AttnKey))?;
    Ok(Memory { outputs, keys, batch: 1, len })
}

fn check_encoder_outputs<T: Real>(config: &ModelConfig, outputs: &Tensor<T>, mask: &[bool]) -> Result<(), ModelError> {
    let (len, width) = outputs.dims2();
    if outputs.shape().len() != 2 || width != 2 * config.latent_dim || mask.len() != len {
        return Err(crate::autograd::AutogradError::ShapeMismatch {
            op: "attention",
            left: outputs.shape().to_vec(),
            right: vec![mask.len()],
        }
        .into());
    }
    Ok(())
}

/// Attention context `[2H]` and weights over source positions for one query.
pub fn attention_context<T: Real>(
    params: &ModelParams<T>,
    decoder_h: &Tensor<T>,
    encoder_outputs: &Tensor<T>,
    source_mask: &[bool],
) -> Result<(Tensor<T>, Vec<T>), ModelError> {
    check_encoder_outputs(params.config(), encoder_outputs, source_mask)?;
    let h = params.config().latent_dim;
    let mut tape = Tape::new();
    let mut net = Net::bind(&mut tape, params, false);
    let enc = bind_single(&mut net, encoder_outputs)?;
    let query = net.tape.constant(decoder_h.clone().with_shape(&[1, h]));
    let (context, weights) = net.attend(&enc, query, source_mask)?;
    Ok((tape.value(context).clone().with_shape(&[2 * h]), tape.value(weights).data().to_vec()))
}

/// Logits, next state, and attention weights of one decoder step.
pub type StepOutput<T> = (Tensor<T>, LstmState<T>, Vec<T>);

/// Logits `[V]`, next state, and attention weights for one decoder step.
pub fn decoder_step<T: Real>(
    params: &ModelParams<T>,
    prev_char: usize,
    state: &LstmState<T>,
    encoder_outputs: &Tensor<T>,
    source_mask: &[bool],
) -> Result<StepOutput<T>, ModelError> {
    let config = params.config();
    check_indices(&[prev_char], config)?;
    check_encoder_outputs(config, encoder_outputs, source_mask)?;
    let h = config.latent_dim;
    let mut tape = Tape::new();
    let mut net = Net::bind(&mut tape, params, false);
    let enc = bind_single(&mut net, encoder_outputs)?;
    let hv = net.tape.constant(state.h.clone().with_shape(&[1, h]));
    let cv = net.tape.constant(state.c.clone().with_shape(&[1, h]));
    let (logits, nh, nc, weights) = net.step(&enc, &[prev_char], hv, cv, source_mask)?;
    let next = LstmState { h: tape.value(nh).clone().with_shape(&[h]), c: tape.value(nc).clone().with_shape(&[h]) };
    let v = config.vocab_size;
    Ok((tape.value(logits).clone().with_shape(&[v]), next, tape.value(weights).data().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::gradient_check_extrapolated;
    use crate::corpus::{encode_pair, DerivationRecord, Direction, SequenceLimits, SuffixCategory};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params<T: Real>(config: &ModelConfig, scale: f64, seed: u64) -> ModelParams<T> {
        ModelParams::init(config, scale, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn toy_vocab() -> Vocabulary {
        Vocabulary::from_chars("$&*+abcdef".chars()).unwrap()
    }

    fn toy_pairs(vocab: &Vocabulary, limits: SequenceLimits) -> Vec<EncodedPair> {
        [("ab", "c", "abc"), ("f", "de", "fd"), ("a", "a", "a"), ("cab", "e", "cabe")]
            .iter()
            .map(|(s, x, p)| {
                let r = DerivationRecord::new(s, x, p, SuffixCategory::Krit);
                encode_pair(&r, vocab, limits, Direction::Formation).unwrap()
            })
            .collect()
    }

    #[test]
    fn encoder_output_shape_at_published_size() {
        let config = ModelConfig::new(128, 53, 17, 18);
        let p = params::<f32>(&config, 0.05, 0);
        let source: Vec<usize> = (0..17).map(|i| (i * 7) % 53).collect();
        let (out, state) = encode_sequence(&p, &source).unwrap();
        assert_eq!(out.shape(), &[17, 256]);
        assert_eq!(state.h.shape(), &[128]);
        assert!(out.all_finite() && state.c.all_finite());
    }

    #[test]
    fn all_padding_source_is_finite() {
        let config = ModelConfig::new(8, 10, 5, 5);
        let p = params::<f32>(&config, 0.3, 1);
        let (out, state) = encode_sequence(&p, &[2; 5]).unwrap();
        assert!(out.all_finite() && state.h.all_finite());
        assert!(encode_sequence(&p, &[2, 10]).is_err());
    }

    #[test]
    fn palindrome_output_norms_are_symmetric() {
        // with both directions sharing weights, a palindrome makes the
        // forward and backward streams mirror images of each other
        let config = ModelConfig::new(6, 10, 5, 5);
        let mut p = params::<f64>(&config, 0.4, 2);
        let fwd: Vec<_> =
            [Param::EncFwdInput, Param::EncFwdRecurrent, Param::EncFwdBias].iter().map(|&q| p.get(q).clone()).collect();
        for (q, t) in [Param::EncBwdInput, Param::EncBwdRecurrent, Param::EncBwdBias].iter().zip(fwd) {
            p.tensors_mut()[*q as usize] = t;
        }
        let (out, _) = encode_sequence(&p, &[4, 6, 9, 6, 4]).unwrap();
        let norm = |r: usize, half: usize| -> f64 { out.row(r)[half * 6..(half + 1) * 6].iter().map(|x| x * x).sum() };
        for s in 0..5 {
            let here = norm(s, 0) + norm(s, 1);
            let mirror = norm(4 - s, 0) + norm(4 - s, 1);
            assert!((here - mirror).abs() < 1e-12);
            assert!((norm(s, 0) - norm(4 - s, 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_contracts() {
        let config = ModelConfig::new(4, 6, 3, 3);
        let p = params::<f64>(&config, 0.5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let enc = Tensor::new(&[3, 8], (0..24).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let h = Tensor::new(&[4], vec![0.1, -0.3, 0.2, 0.5]).unwrap();

        let (ctx, w) = attention_context(&p, &h, &enc, &[false, true, false]).unwrap();
        assert_eq!(w, vec![0.0, 1.0, 0.0]);
        assert_eq!(ctx.data(), enc.row(1));

        let same = Tensor::new(&[3, 8], enc.row(0).repeat(3)).unwrap();
        let (_, w) = attention_context(&p, &h, &same, &[true, true, true]).unwrap();
        assert!(w.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-12));

        let (_, w) = attention_context(&p, &h, &enc, &[true, true, true]).unwrap();
        assert!(w.iter().all(|&x| x >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-6);

        assert!(matches!(
            attention_context(&p, &h, &enc, &[false; 3]),
            Err(ModelError::Autograd(crate::autograd::AutogradError::AllMasked { .. }))
        ));
    }

    #[test]
    fn decoder_step_shape_and_purity() {
        let config = ModelConfig::new(4, 10, 3, 3);
        let p = params::<f32>(&config, 0.2, 5);
        let (enc, state) = encode_sequence(&p, &[4, 5, 2]).unwrap();
        let mask = [true, true, false];
        let a = decoder_step(&p, 1, &state, &enc, &mask).unwrap();
        let b = decoder_step(&p, 1, &state, &enc, &mask).unwrap();
        assert_eq!(a.0.shape(), &[10]);
        assert_eq!(a, b);
        assert_eq!(a.2[2], 0.0);
        assert!(decoder_step(&p, 10, &state, &enc, &mask).is_err());
    }

    #[test]
    fn batched_step_matches_single_step() {
        let config = ModelConfig::new(5, 10, 4, 4);
        let p = params::<f64>(&config, 0.3, 6);
        let sources: [&[usize]; 2] = [&[4, 5, 2, 2], &[6, 7, 8, 9]];
        let mut tape = Tape::new();
        let mut net = Net::bind(&mut tape, &p, false);
        let enc = net.encode(&sources).unwrap();
        let mask = source_mask(&sources, 2);
        let (logits, ..) = net.step(&enc.memory, &[1, 1], enc.h0, enc.c0, &mask).unwrap();
        let batched = tape.value(logits).clone();
        for (b, src) in sources.iter().enumerate() {
            let (out, state) = encode_sequence(&p, src).unwrap();
            let m: Vec<bool> = src.iter().map(|&i| i != 2).collect();
            let (single, ..) = decoder_step(&p, 1, &state, &out, &m).unwrap();
            for (x, y) in single.data().iter().zip(batched.row(b)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn initial_loss_is_near_uniform() {
        let vocab = toy_vocab();
        let config = ModelConfig::new(16, vocab.len(), 5, 5);
        let p = params::<f32>(&config, 0.01, 7);
        let limits = config.limits();
        let loss = forward_teacher_forced(&p, &toy_pairs(&vocab, limits), &vocab).unwrap();
        let uniform = (vocab.len() as f32).ln();
        assert!((loss - uniform).abs() / uniform < 0.02, "{loss} vs {uniform}");
    }

    #[test]
    fn empty_target_scores_only_the_end_marker() {
        let vocab = toy_vocab();
        let config = ModelConfig::new(4, vocab.len(), 3, 2);
        let p = params::<f64>(&config, 0.1, 8);
        let pair = EncodedPair {
            source: vocab.encode_str("ab*").unwrap(),
            target: vocab.encode_str("&$**").unwrap(),
            direction: Direction::Formation,
        };
        let mut tape = Tape::new();
        let vars: Vec<Var> = p.tensors().iter().map(|t| tape.param(t.clone())).collect();
        let out = TeacherForced::record(&mut tape, &vars, &config, std::slice::from_ref(&pair), vocab.pad()).unwrap();
        assert_eq!(out.count, 1);
        let (enc, state) = encode_sequence(&p, &pair.source).unwrap();
        let (logits, ..) = decoder_step(&p, vocab.start(), &state, &enc, &[true, true, false]).unwrap();
        let l = logits.data();
        let max = l.iter().copied().fold(f64::MIN, f64::max);
        let lse = max + l.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        let expected = lse - l[vocab.end()];
        assert!((tape.value(out.loss).data()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn step_gradients_pass_check_in_f64() {
        let vocab = toy_vocab();
        let config = ModelConfig::new(3, vocab.len(), 3, 2);
        let p = params::<f64>(&config, 0.5, 9);
        let pair = EncodedPair {
            source: vocab.encode_str("ab*").unwrap(),
            target: vocab.encode_str("&c$*").unwrap(),
            direction: Direction::Formation,
        };
        let report = gradient_check_extrapolated(
            |tape, vars| {
                TeacherForced::record(tape, vars, &config, std::slice::from_ref(&pair), vocab.pad())
                    .map(|o| o.loss)
                    .map_err(|e| match e {
                        ModelError::Autograd(a) => a,
                        other => panic!("{other}"),
                    })
            },
            p.tensors(),
            0.05,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-5, "{report:?}");
    }

    #[test]
    fn full_forward_shapes_are_finite_for_random_configs() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..5 {
            let h = rng.random_range(1..8);
            let v = rng.random_range(5..12);
            let s = rng.random_range(1..6);
            let config = ModelConfig::new(h, v, s, 4);
            let p = params::<f32>(&config, 0.1, rng.random());
            let source: Vec<usize> = (0..s).map(|_| rng.random_range(0..v)).collect();
            let (enc, mut state) = encode_sequence(&p, &source).unwrap();
            let mask = vec![true; s];
            for step in 0..6 {
                let (logits, next, _) = decoder_step(&p, step % v, &state, &enc, &mask).unwrap();
                assert_eq!(logits.shape(), &[v]);
                assert!(logits.all_finite());
                state = next;
            }
        }
    }
}
