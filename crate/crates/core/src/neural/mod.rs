//! Minimal sequence-model runtime: the layer set needed by the acoustic
//! models and the Wavenet vocoder, with hand-rolled reverse-mode gradients,
//! a momentum optimizer, finite-difference checking, and a binary checkpoint
//! format.

pub mod checkpoint;
pub mod dilated;
pub mod gradcheck;
pub mod layers;
pub mod mat;
pub mod network;
pub mod optim;
pub mod tensor;

pub use dilated::DilatedCausalBlock;
pub use mat::Mat;
pub use network::{LayerSpec, Network};
pub use optim::{OptimizerState, SgdConfig};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("{layer}: expected input dim {expected}, got {got}")]
    ShapeMismatch {
        layer: String,
        expected: usize,
        got: usize,
    },
    #[error("backward called without a cached forward pass")]
    NoForwardCache,
    #[error("{layer}: non-finite activation")]
    NonFinite { layer: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
