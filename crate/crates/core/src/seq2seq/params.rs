use rand::Rng;

use super::{ModelConfig, ModelError};
use crate::autograd::{Real, Tensor};

/// Every weight array of the network, in checkpoint order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
pub enum Param {
    EncFwdInput,
    EncFwdRecurrent,
    EncFwdBias,
    EncBwdInput,
    EncBwdRecurrent,
    EncBwdBias,
    BridgeHidden,
    BridgeHiddenBias,
    BridgeCell,
    BridgeCellBias,
    AttnQuery,
    AttnKey,
    AttnScore,
    DecChar,
    DecContext,
    DecRecurrent,
    DecBias,
    OutWeight,
    OutBias,
}

impl Param {
    pub const ALL: [Param; 19] = [
        Param::EncFwdInput,
        Param::EncFwdRecurrent,
        Param::EncFwdBias,
        Param::EncBwdInput,
        Param::EncBwdRecurrent,
        Param::EncBwdBias,
        Param::BridgeHidden,
        Param::BridgeHiddenBias,
        Param::BridgeCell,
        Param::BridgeCellBias,
        Param::AttnQuery,
        Param::AttnKey,
        Param::AttnScore,
        Param::DecChar,
        Param::DecContext,
        Param::DecRecurrent,
        Param::DecBias,
        Param::OutWeight,
        Param::OutBias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::EncFwdInput => "encoder.forward.input",
            Param::EncFwdRecurrent => "encoder.forward.recurrent",
            Param::EncFwdBias => "encoder.forward.bias",
            Param::EncBwdInput => "encoder.backward.input",
            Param::EncBwdRecurrent => "encoder.backward.recurrent",
            Param::EncBwdBias => "encoder.backward.bias",
            Param::BridgeHidden => "bridge.hidden",
            Param::BridgeHiddenBias => "bridge.hidden_bias",
            Param::BridgeCell => "bridge.cell",
            Param::BridgeCellBias => "bridge.cell_bias",
            Param::AttnQuery => "attention.query",
            Param::AttnKey => "attention.key",
            Param::AttnScore => "attention.score",
            Param::DecChar => "decoder.char_input",
            Param::DecContext => "decoder.context_input",
            Param::DecRecurrent => "decoder.recurrent",
            Param::DecBias => "decoder.bias",
            Param::OutWeight => "output.weight",
            Param::OutBias => "output.bias",
        }
    }

    pub fn shape(self, c: &ModelConfig) -> Vec<usize> {
        let (h, v) = (c.latent_dim, c.vocab_size);
        match self {
            Param::EncFwdInput | Param::EncBwdInput | Param::DecChar => vec![v, 4 * h],
            Param::EncFwdRecurrent | Param::EncBwdRecurrent | Param::DecRecurrent => vec![h, 4 * h],
            Param::EncFwdBias | Param::EncBwdBias | Param::DecBias => vec![4 * h],
            Param::BridgeHidden | Param::BridgeCell | Param::AttnKey => vec![2 * h, h],
            Param::BridgeHiddenBias | Param::BridgeCellBias => vec![h],
            Param::AttnQuery => vec![h, h],
            Param::AttnScore => vec![h, 1],
            Param::DecContext => vec![2 * h, 4 * h],
            Param::OutWeight => vec![h, v],
            Param::OutBias => vec![v],
        }
    }

    fn is_lstm_bias(self) -> bool {
        matches!(self, Param::EncFwdBias | Param::EncBwdBias | Param::DecBias)
    }

    fn is_bias(self) -> bool {
        self.is_lstm_bias() || matches!(self, Param::BridgeHiddenBias | Param::BridgeCellBias | Param::OutBias)
    }
}

/// Trainable weights. LSTM gate blocks are laid out input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T = f32> {
    config: ModelConfig,
    tensors: Vec<Tensor<T>>,
}

impl<T: Real> ModelParams<T> {
    /// Weights uniform in `[-init_scale, init_scale]`; biases zero except the
    /// LSTM forget gates, which start at one.
    pub fn init(config: &ModelConfig, init_scale: f64, rng: &mut impl Rng) -> Result<Self, ModelError> {
        config.validate()?;
        let h = config.latent_dim;
        let tensors = Param::ALL
            .iter()
            .map(|&p| {
                let shape = p.shape(config);
                let n: usize = shape.iter().product();
                let data = if p.is_bias() {
                    let mut d = vec![T::zero(); n];
                    if p.is_lstm_bias() {
                        d[h..2 * h].iter_mut().for_each(|x| *x = T::one());
                    }
                    d
                } else {
                    (0..n).map(|_| T::lit(rng.random_range(-init_scale..=init_scale))).collect()
                };
                Tensor::new(&shape, data).expect("shape matches data")
            })
            .collect();
        Ok(Self { config: config.clone(), tensors })
    }

    /// Assembles parameters from named arrays, checking every shape.
    pub fn from_tensors(config: &ModelConfig, tensors: Vec<Tensor<T>>) -> Result<Self, ModelError> {
        config.validate()?;
        if tensors.len() != Param::ALL.len() {
            return Err(ModelError::Config(format!("expected {} arrays, got {}", Param::ALL.len(), tensors.len())));
        }
        for (p, t) in Param::ALL.iter().zip(&tensors) {
            if t.shape() != p.shape(config).as_slice() {
                return Err(ModelError::Config(format!(
                    "{} has shape {:?}, expected {:?}",
                    p.name(),
                    t.shape(),
                    p.shape(config)
                )));
            }
        }
        Ok(Self { config: config.clone(), tensors })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn get(&self, p: Param) -> &Tensor<T> {
        &self.tensors[p as usize]
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, &Tensor<T>)> {
        Param::ALL.iter().map(|p| p.name()).zip(&self.tensors)
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::all_finite)
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams { config: self.config.clone(), tensors: self.tensors.iter().map(Tensor::cast).collect() }
    }
}
