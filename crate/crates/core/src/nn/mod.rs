//! Minimal dense-tensor kernel with tape-based reverse-mode differentiation.
//!
//! Only what the cost, policy and value networks need: affine layers,
//! embeddings, layer normalization, softmax, multi-head self-attention,
//! loss reductions and Adam. Matrix products go through `matrixmultiply`.

mod check;
mod checkpoint;
mod graph;
mod layers;
mod optim;
mod params;
mod real;
mod tensor;

use thiserror::Error;

pub use check::{check_params, finite_difference_check, relative_error, FdConfig, FdReport};
pub use checkpoint::{
    assign_by_name, fnv1a64, load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint,
    CHECKPOINT_MAGIC,
};
pub use graph::{Gradients, Graph, Var};
pub use layers::{one_hot, Activation, EncoderLayer, LayerNorm, Linear, Mlp, MultiHeadAttention};
pub use optim::{adam_step, clip_grad_norm, Adam, AdamConfig};
pub use params::{ParamId, Params};
pub use real::Real;
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("tape already consumed by a backward pass")]
    TapeConsumed,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
