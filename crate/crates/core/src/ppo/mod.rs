//! Shared-policy PPO with GAE and Adam, written against ndarray.
//!
//! Every agent of a policy group is an independent learner contributing its
//! own trajectory; all of them act through one parameter set.

mod adam;
mod buffer;
mod checkpoint;
mod config;
mod dist;
mod gae;
mod loss;
mod network;
mod trainer;

pub use adam::Adam;
pub use buffer::TrajectoryBuffer;
pub use checkpoint::{Checkpoint, NamedTensor, FORMAT as CHECKPOINT_FORMAT};
pub use config::PpoConfig;
pub use dist::{entropy, gaussian_log_prob, sample_action, squash_action};
pub use gae::{gae, gae_reference};
pub use loss::{normalize_advantages, ppo_loss, LossCoefs, LossStats, Minibatch};
pub use network::{ActorCritic, PolicyInit, PolicyOutput, Real, TensorSpec, LOG_STD_MAX, LOG_STD_MIN};
pub use trainer::{collect_rollout, uniform_actions, Learner, StepMetrics, Trainer};

use thiserror::Error;

use crate::env::EnvError;

#[derive(Debug, Error)]
pub enum PpoError {
    #[error("invalid parameter `{field}`: {message}")]
    Config { field: &'static str, message: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite observation in row {row}")]
    NonFiniteInput { row: usize },
    #[error("non-finite loss: {diagnostics}")]
    NonFinite { diagnostics: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}
