//! Minimal dense-tensor and reverse-mode differentiation core.
//!
//! Everything runs on 64-bit floats with batch size 1: the sequence models
//! built on top are trained and evaluated one example at a time, and gradient
//! fidelity matters more than throughput at that scale. Parameters live in a
//! [`ParamSet`]; a [`Tape`] records one forward pass eagerly and produces
//! per-parameter gradients on `backward`.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use checkpoint::Checkpoint;
pub use error::{Error, Result};
pub use layers::{BiLstm, BiLstmOut, CharAlphabet, CharCnn, Dense, Embedding, LstmCell};
pub use optim::OptimizerState;
pub use params::{Gradients, ParamId, ParamSet};
pub use tape::{LossKind, LossTarget, NodeId, Tape};
pub use tensor::Tensor;
