//! Minimal dense-network engine: batched forward pass, exact backpropagation,
//! Xavier initialization, clipped Adam steps, soft target updates and
//! parameter-space perturbation.

mod adam;
mod checkpoint;
mod matrix;
mod mlp;

pub use adam::{Adam, AdamConfig, StepReport};
pub use checkpoint::{AdamCheckpoint, LayerCheckpoint, NetCheckpoint, NET_FORMAT, NET_VERSION};
pub use matrix::Matrix;
pub use mlp::{
    xavier_bound, xavier_init, xavier_init_with, ActSpan, Activation, Gradients, Layer, LayerGrad,
    MlpNet, Trace,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
