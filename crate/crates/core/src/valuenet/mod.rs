//! From-scratch differentiable value function: point-cloud encoder, state
//! encoder, softplus head, one-step Bellman training against an EMA target
//! network, ensembles, and checkpointing.

pub mod batch;
pub mod checkpoint;
pub mod infer;
pub mod map;
pub mod net;
pub mod train;

use thiserror::Error;

pub use batch::{sample_batch, Batch, Bootstrap, CloudGroup, Transition};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use infer::InferNet;
pub use map::{evaluate_value_map, ValueMap};
pub use net::{encode_ee, CloudCache, Grads, ValueNet};
pub use train::{td_target, Ensemble, TrainState};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("cloud is not centered (centroid {cx:.3e}, {cy:.3e}; caller must subtract it)")]
    UncenteredCloud { cx: f64, cy: f64 },
    #[error("non-finite loss at train step {step}: {detail}")]
    NonFiniteLoss { step: u64, detail: String },
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}
