//! Dense feed-forward networks with exact reverse-mode gradients, Adam, and
//! parameter transfer helpers (Polyak averaging and hard copies).
//!
//! All arithmetic is `f64`. Parameters live in one flat array per network in
//! canonical layer-major order, which is also the serialized order.

mod adam;
mod fastmath;
mod mlp;
mod rng;

pub use adam::{adam_step, AdamState};
pub use mlp::{
    hard_copy, polyak_update, Activation, Mlp, OutputTransform, ParamVector, SnapshotDocument,
    Trace, SNAPSHOT_FORMAT_VERSION,
};
pub use rng::Rng;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeuralError {
    #[error("shape mismatch for {what}: expected {expected}, got {actual}")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("architecture mismatch: {0}")]
    Architecture(String),
    #[error("invalid layer sizes: {0}")]
    InvalidLayerSizes(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("snapshot format error: {0}")]
    Format(String),
}
