//! Multi-agent simulation engine with ray-cast perception and shared-policy
//! PPO training.
//!
//! - [`engine`]: double-buffered agent store, uniform-grid neighbor search and
//!   the self / pair / graph interaction scheduler.
//! - [`perception`]: per-agent sector views built by ray casting.
//! - [`env`]: the flock and tag training environments and the
//!   bounded-confidence opinion model.
//! - [`ppo`]: actor-critic networks, GAE, the clipped surrogate and the
//!   rollout/minibatch training schedule.
//! - [`harness`]: run configuration, CSV/JSON outputs and the commands behind
//!   the `flockrl` binary.

// Validation uses `!(x > 0.0)` style checks so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod env;
pub mod geometry;
pub mod harness;
pub mod perception;
pub mod ppo;

pub use geometry::{torus_displacement, Vec2, WorldSpec};
