//! Discrete-time agent store and interaction scheduler.
//!
//! State lives in a double-buffered [`AgentStore`]: interactions read the
//! committed half and write only the pending half, so every agent in a step
//! observes the same snapshot. Work is spread across the current rayon pool
//! one agent per task; each agent's accumulator is only ever touched by the
//! task that owns it, and neighbor contributions are folded in ascending
//! index order, so results are bitwise identical at any thread count.

mod graph;
mod grid;
mod store;

pub use graph::EdgeList;
pub use grid::{neighbors_within, SpatialGrid};
pub use store::{AgentMut, AgentRef, AgentStore};

use thiserror::Error;

/// Failure raised from inside an interaction callback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fault(pub String);

impl From<&str> for Fault {
    fn from(s: &str) -> Self {
        Fault(s.to_owned())
    }
}

impl From<String> for Fault {
    fn from(s: String) -> Self {
        Fault(s)
    }
}

pub type InteractionResult = Result<(), Fault>;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("agent {agent} at ({x}, {y}) lies outside the world")]
    OutOfBounds { agent: usize, x: f32, y: f32 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("interaction failed on agent {agent}: {message}")]
    Callback { agent: usize, message: String },
    #[error("edge ({src}, {dst}) references an agent outside 0..{n}")]
    DanglingEdge { src: usize, dst: usize, n: usize },
    #[error("duplicate edge ({src}, {dst})")]
    DuplicateEdge { src: usize, dst: usize },
    #[error("{what}: expected length {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
}

/// Keeps the fault with the lowest agent index so error reporting does not
/// depend on scheduling.
pub(crate) fn first_fault(faults: Option<(usize, Fault)>) -> Result<(), EngineError> {
    match faults {
        None => Ok(()),
        Some((agent, Fault(message))) => Err(EngineError::Callback { agent, message }),
    }
}
