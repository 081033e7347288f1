//! Training environments built on the engine, plus the opinion-dynamics demo.

mod flock;
mod opinion;
mod reward;
pub mod snapshot;
mod tag;

pub use flock::{update_speed, FlockAgent, FlockEnv, FlockParams};
pub use opinion::{Opinion, OpinionModel};
pub use reward::{flock_reward_f, RewardShape};
pub use tag::{TagAgent, TagEnv, TagParams, CHASER, RUNNER};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{AgentStore, EngineError, SpatialGrid};
use crate::geometry::{Vec2, WorldSpec};
use crate::perception::{PerceptionError, ViewBuffer};

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("invalid parameter `{field}`: {message}")]
    Config { field: &'static str, message: String },
    #[error("action array has {actual} values, expected {expected}")]
    ActionShape { expected: usize, actual: usize },
    #[error("non-finite action for agent {agent}")]
    NonFiniteAction { agent: usize },
    #[error("reward distance {d} outside [0, {range})")]
    RewardDomain { d: f32, range: f32 },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
}

pub(crate) fn config_err<T>(field: &'static str, message: impl Into<String>) -> Result<T, EnvError> {
    Err(EnvError::Config {
        field,
        message: message.into(),
    })
}

/// Observations and rewards after a reset or step.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvOutput {
    pub obs_dim: usize,
    /// Row-major `n x obs_dim`.
    pub observations: Vec<f32>,
    pub rewards: Vec<f32>,
}

impl EnvOutput {
    pub fn observation(&self, i: usize) -> &[f32] {
        &self.observations[i * self.obs_dim..(i + 1) * self.obs_dim]
    }
}

/// Closed interval for one action dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionBound {
    pub lo: f32,
    pub hi: f32,
}

impl ActionBound {
    pub const fn new(lo: f32, hi: f32) -> Self {
        Self { lo, hi }
    }

    #[inline]
    pub fn clip(&self, v: f32) -> f32 {
        v.clamp(self.lo, self.hi)
    }
}

/// Agents driven by one shared policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGroup {
    pub name: String,
    /// Ascending agent indices.
    pub agents: Vec<usize>,
    pub bounds: Vec<ActionBound>,
}

/// A continuing multi-agent task stepped with one action row per agent.
pub trait MultiAgentEnv {
    fn num_agents(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize {
        2
    }
    fn groups(&self) -> &[PolicyGroup];
    fn output(&self) -> &EnvOutput;
    /// `actions` is row-major `n x action_dim`, already inside each group's
    /// bounds.
    fn step(&mut self, actions: &[f32]) -> Result<&EnvOutput, EnvError>;
    /// Per-agent state rows in the snapshot CSV schema.
    fn snapshot(&self, step: u64) -> Vec<snapshot::SnapshotRow>;
    /// Per-agent sector views behind the current observations.
    fn views(&self) -> &ViewBuffer;
    /// Committed agent state, enough to continue stepping exactly.
    fn state(&self) -> EnvState;
    fn restore(&mut self, state: &EnvState) -> Result<(), EnvError>;
}

/// Serializable agent columns of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub positions: Vec<[f32; 2]>,
    pub headings: Vec<f32>,
    pub speeds: Vec<f32>,
    pub tags: Vec<u8>,
}

impl EnvState {
    pub(crate) fn capture<X: Copy + Send + Sync>(store: &AgentStore<X>) -> Self {
        Self {
            positions: store.positions().iter().map(|p| [p.x, p.y]).collect(),
            headings: store.headings().to_vec(),
            speeds: store.speeds().to_vec(),
            tags: store.tags().to_vec(),
        }
    }

    pub(crate) fn to_store<X: Copy + Default + Send + Sync>(
        &self,
        world: WorldSpec,
    ) -> Result<AgentStore<X>, EnvError> {
        Ok(AgentStore::new(
            world,
            self.positions.iter().map(|&[x, y]| Vec2::new(x, y)).collect(),
            self.headings.clone(),
            self.speeds.clone(),
            self.tags.clone(),
        )?)
    }
}

pub(crate) fn check_actions(actions: &[f32], n: usize, dim: usize) -> Result<(), EnvError> {
    if actions.len() != n * dim {
        return Err(EnvError::ActionShape {
            expected: n * dim,
            actual: actions.len(),
        });
    }
    if let Some(k) = actions.iter().position(|a| !a.is_finite()) {
        return Err(EnvError::NonFiniteAction { agent: k / dim });
    }
    Ok(())
}

/// Mean torus distance from each agent to its nearest other agent.
pub fn mean_nearest_neighbor_distance(positions: &[Vec2], world: &WorldSpec) -> f64 {
    let n = positions.len();
    if n < 2 {
        return 0.0;
    }
    // Cell size giving a handful of agents per cell at this density.
    let cell = (2.0 * (world.area() / n as f32).sqrt())
        .min(0.5 * world.width.min(world.height))
        .max(1e-3);
    let grid = SpatialGrid::build(positions, world, cell).expect("positions are in-world");
    let mut scratch = Vec::new();
    let mut total = 0.0f64;
    for i in 0..n {
        grid.collect_neighbors(positions, world, i, cell, &mut scratch);
        let best = scratch.iter().map(|&(_, d, _)| d).fold(f32::INFINITY, f32::min);
        let best = if best.is_finite() {
            best
        } else {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| world.distance(positions[i], positions[j]))
                .fold(f32::INFINITY, f32::min)
        };
        total += f64::from(best);
    }
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_neighbor_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let w = WorldSpec::new(50.0, 30.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for n in [2usize, 3, 40, 300] {
            let pts: Vec<Vec2> = (0..n)
                .map(|_| Vec2::new(rng.random_range(0.0..50.0), rng.random_range(0.0..30.0)))
                .collect();
            let brute: f64 = (0..n)
                .map(|i| {
                    (0..n)
                        .filter(|&j| j != i)
                        .map(|j| f64::from(w.distance(pts[i], pts[j])))
                        .fold(f64::INFINITY, f64::min)
                })
                .sum::<f64>()
                / n as f64;
            assert!((mean_nearest_neighbor_distance(&pts, &w) - brute).abs() < 1e-9);
        }
    }
}
