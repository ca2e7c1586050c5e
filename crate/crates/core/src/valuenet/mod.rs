//! Value network: a small MLP with LayerNorm and GeLU trained by Adam on a
//! pointwise Huber loss, PBS feature encoding, and a replay buffer.

mod buffer;
mod encode;
mod mlp;
mod net_value;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use buffer::{Example, ReplayBuffer};
pub use encode::{encode, encode_batch, encoded_width, output_width};
pub use mlp::{
    gelu, gelu_grad, gradient_check, huber, huber_grad, train_step, Adam, Checkpoint, Dense, LayerNorm, Mlp,
};
pub use net_value::NetValue;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("input width {got}, expected {expected}")]
    Width { expected: usize, got: usize },
    #[error("non-finite loss {loss} at optimizer step {step}")]
    NonFiniteLoss { step: u64, loss: f64 },
    #[error("cannot sample from an empty replay buffer")]
    EmptyBuffer,
    #[error("no feature encoding for game {0}")]
    Unsupported(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    pub learning_rate: f64,
    /// Epochs between learning-rate halvings; zero disables the schedule.
    pub lr_halving_epochs: usize,
    pub batch_size: usize,
    pub huber_delta: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            input: 1,
            hidden: vec![256, 256],
            output: 1,
            learning_rate: 3e-4,
            lr_halving_epochs: 400,
            batch_size: 512,
            huber_delta: 1.0,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: &str| Err(NetError::Config(m.to_string()));
        if self.hidden.is_empty() {
            return bad("at least one hidden layer is required");
        }
        if self.input == 0 || self.output == 0 || self.hidden.contains(&0) {
            return bad("layer sizes must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.huber_delta > 0.0) {
            return bad("Huber transition must be positive");
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        if self.lr_halving_epochs == 0 {
            return self.learning_rate;
        }
        self.learning_rate * 0.5f64.powi((epoch / self.lr_halving_epochs) as i32)
    }
}
