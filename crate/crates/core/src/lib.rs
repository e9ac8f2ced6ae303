//! Character-level attention seq2seq for Sanskrit derivative nouns.
//!
//! Forms a pada from `stem+suffix` and splits a pada back into stem and
//! suffix. Strings are SLP1; [`translit`] converts from ITRANS.

pub mod autograd;
pub mod corpus;
pub mod eval;
pub mod seq2seq;
pub mod translit;

pub use corpus::{CorpusError, DerivationRecord, Direction, SequenceLimits, SuffixCategory, Vocabulary};
pub use eval::{EvalReport, Score, Task};
pub use seq2seq::{Checkpoint, ModelConfig, ModelError, ModelParams, Predictor, TrainConfig};
pub use translit::TranslitError;
