//! Dense tensors with tape-based reverse-mode differentiation.
//!
//! Only what the encoder-decoder needs is here: 2-D matrix products,
//! LSTM nonlinearities, row/column bookkeeping, masked softmax, attention
//! pooling and a masked cross-entropy loss. Broadcasting is limited to
//! exact shapes plus one-element operands; the few row-wise broadcasts
//! the model needs are separate ops (`add_row`, `add_tiled`).

mod adam;
mod gradcheck;
mod tape;
mod tensor;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{gradient_check, gradient_check_extrapolated, relative_error, GradCheck};
pub use tape::{Elementwise, Grads, Tape, Var};
pub use tensor::{Real, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutogradError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch { op: &'static str, left: Vec<usize>, right: Vec<usize> },
    #[error("index {index} out of range for size {bound}")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("backward needs a one-element loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("row {row} has no unmasked position")]
    AllMasked { row: usize },
    #[error("function value is not finite")]
    NonFinite,
}
