use std::f32::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::snapshot::SnapshotRow;
use super::{
    check_actions, config_err, ActionBound, EnvError, EnvOutput, EnvState, MultiAgentEnv, PolicyGroup, RewardShape,
};
use crate::engine::{AgentStore, SpatialGrid};
use crate::geometry::{normalize_angle, Vec2, WorldSpec};
use crate::perception::{compute_views_into, ViewBuffer, ViewConfig};

pub const RUNNER: u8 = 0;
pub const CHASER: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagParams {
    pub n_runners: usize,
    pub n_chasers: usize,
    pub world: WorldSpec,
    pub body_radius: f32,
    /// Sectors per channel.
    pub sectors: usize,
    pub fov: f32,
    pub view_range: f32,
    pub s_max_runner: f32,
    pub s_max_chaser: f32,
    pub theta_max: f32,
    pub r_touch: f32,
    pub proximity: RewardShape,
    pub proximity_weight: f32,
}

impl Default for TagParams {
    fn default() -> Self {
        let body_radius = 0.25;
        Self {
            n_runners: 450,
            n_chasers: 50,
            world: WorldSpec::new(100.0, 100.0),
            body_radius,
            sectors: 64,
            fov: 250f32.to_radians(),
            view_range: 10.0,
            s_max_runner: 0.5,
            s_max_chaser: 0.375,
            theta_max: 0.2,
            r_touch: 1.0,
            proximity: RewardShape::new(1.0, 0.5, body_radius),
            proximity_weight: 0.1,
        }
    }
}

impl TagParams {
    /// Splits `n` agents 9:1 into runners and chasers (at least one chaser).
    pub fn with_total(n: usize) -> Self {
        let n_chasers = (n / 10).max(1);
        Self {
            n_runners: n.saturating_sub(n_chasers),
            n_chasers,
            ..Self::default()
        }
    }

    pub fn n(&self) -> usize {
        self.n_runners + self.n_chasers
    }

    pub fn view(&self) -> ViewConfig {
        ViewConfig {
            sectors: self.sectors,
            fov: self.fov,
            range: self.view_range,
            channels: 2,
            body_radius: self.body_radius,
        }
    }

    pub fn obs_dim(&self) -> usize {
        2 * self.sectors
    }

    pub fn bounds(&self, tag: u8) -> [ActionBound; 2] {
        let s_max = if tag == CHASER {
            self.s_max_chaser
        } else {
            self.s_max_runner
        };
        [
            ActionBound::new(-self.theta_max, self.theta_max),
            ActionBound::new(0.0, s_max),
        ]
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.n_runners == 0 {
            return config_err("n_runners", "at least one runner is required");
        }
        if self.n_chasers == 0 {
            return config_err("n_chasers", "at least one chaser is required");
        }
        if !self.world.is_valid() {
            return config_err("world", "width and height must be positive");
        }
        if !(self.theta_max > 0.0 && self.theta_max <= PI) {
            return config_err("theta_max", format!("must lie in (0, pi], got {}", self.theta_max));
        }
        if !(self.s_max_runner > 0.0) {
            return config_err("s_max_runner", "must be positive");
        }
        if !(self.s_max_chaser > 0.0 && self.s_max_chaser <= self.s_max_runner) {
            return config_err("s_max_chaser", "must lie in (0, s_max_runner]");
        }
        if !(self.body_radius > 0.0 && 2.0 * self.body_radius < self.view_range) {
            return config_err("body_radius", "need 0 < 2 * body_radius < view_range");
        }
        if !(self.r_touch >= 0.0 && self.proximity_weight >= 0.0) {
            return config_err("r_touch", "reward magnitudes must be non-negative");
        }
        if self.proximity.d_collide != 2.0 * self.body_radius {
            return config_err("proximity", "collision distance must equal twice the body radius");
        }
        if self.view_range + self.body_radius > 0.5 * self.world.width.min(self.world.height) {
            return config_err("view_range", "view range must be under half the world extent");
        }
        self.view().validate().map_err(|e| EnvError::Config {
            field: "view",
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TagAgent {
    pub reward: f32,
    /// Runner-chaser contacts this step.
    pub touches: u32,
}

/// Pursuit-evasion task with runners (tag 0) and chasers (tag 1), each type
/// driven by its own policy. Views have one channel per type; actions are
/// (turn, distance moved along the new heading).
#[derive(Debug, Clone)]
pub struct TagEnv {
    params: TagParams,
    view: ViewConfig,
    store: AgentStore<TagAgent>,
    grid: SpatialGrid,
    views: ViewBuffer,
    output: EnvOutput,
    groups: Vec<PolicyGroup>,
    touches: u64,
}

impl TagEnv {
    /// Runners occupy indices `0..n_runners`, chasers the rest.
    pub fn reset(params: TagParams, seed: u64) -> Result<Self, EnvError> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = params.n();
        let mut positions = Vec::with_capacity(n);
        let mut headings = Vec::with_capacity(n);
        for _ in 0..n {
            let x = rng.random_range(0.0..params.world.width);
            let y = rng.random_range(0.0..params.world.height);
            positions.push(Vec2::new(x, y));
            headings.push(rng.random_range(0.0..TAU));
        }
        let tags = (0..n)
            .map(|i| if i < params.n_runners { RUNNER } else { CHASER })
            .collect();
        let store = AgentStore::new(params.world, positions, headings, vec![0.0; n], tags)?;
        Self::from_store(params, store)
    }

    /// Wraps an explicitly placed population; tags must be runners then chasers.
    pub fn from_store(params: TagParams, mut store: AgentStore<TagAgent>) -> Result<Self, EnvError> {
        params.validate()?;
        let n = params.n();
        if store.len() != n {
            return config_err("n_runners", format!("store holds {} agents, expected {n}", store.len()));
        }
        let ordered = store
            .tags()
            .iter()
            .enumerate()
            .all(|(i, &t)| t == if i < params.n_runners { RUNNER } else { CHASER });
        if !ordered {
            return config_err("n_runners", "store tags must list runners before chasers");
        }
        store.apply_self(|_, w| {
            *w.extra = TagAgent::default();
            Ok(())
        })?;
        store.commit();
        let view = params.view();
        let grid = SpatialGrid::build(store.positions(), &params.world, view.query_radius())?;
        let groups = vec![
            PolicyGroup {
                name: "runner".into(),
                agents: (0..params.n_runners).collect(),
                bounds: params.bounds(RUNNER).to_vec(),
            },
            PolicyGroup {
                name: "chaser".into(),
                agents: (params.n_runners..n).collect(),
                bounds: params.bounds(CHASER).to_vec(),
            },
        ];
        let mut env = Self {
            params,
            view,
            views: ViewBuffer::new(n, &view),
            grid,
            store,
            output: EnvOutput {
                obs_dim: params.obs_dim(),
                observations: vec![0.0; n * params.obs_dim()],
                rewards: vec![0.0; n],
            },
            groups,
            touches: 0,
        };
        env.observe()?;
        Ok(env)
    }

    pub fn params(&self) -> &TagParams {
        &self.params
    }

    pub fn store(&self) -> &AgentStore<TagAgent> {
        &self.store
    }

    pub fn views(&self) -> &ViewBuffer {
        &self.views
    }

    /// Runner-chaser pairs in contact after the last step.
    pub fn touches(&self) -> u64 {
        self.touches
    }

    fn observe(&mut self) -> Result<(), EnvError> {
        compute_views_into(&self.store, &self.grid, &self.view, &[0, 1], &mut self.views)?;
        self.output.observations.copy_from_slice(self.views.values());
        for (r, a) in self.output.rewards.iter_mut().zip(self.store.extras()) {
            *r = a.reward;
        }
        self.touches = self
            .store
            .extras()
            .iter()
            .zip(self.store.tags())
            .filter(|(_, &t)| t == CHASER)
            .map(|(a, _)| u64::from(a.touches))
            .sum();
        Ok(())
    }

    pub fn step(&mut self, actions: &[f32]) -> Result<&EnvOutput, EnvError> {
        let p = self.params;
        check_actions(actions, p.n(), 2)?;
        let runner_bounds = p.bounds(RUNNER);
        let chaser_bounds = p.bounds(CHASER);
        self.store.apply_self(|me, w| {
            let a = &actions[2 * me.index..2 * me.index + 2];
            let [turn, dist] = if me.tag == CHASER { chaser_bounds } else { runner_bounds };
            let heading = normalize_angle(me.heading + turn.clip(a[0]));
            let step = dist.clip(a[1]);
            *w.heading = heading;
            *w.speed = step;
            *w.pos = me.pos + Vec2::from_angle(heading) * step;
            *w.extra = TagAgent::default();
            Ok(())
        })?;
        self.store.commit();
        self.grid = SpatialGrid::build(self.store.positions(), &p.world, self.view.query_radius())?;
        let range = p.view_range;
        let touch = p.proximity.d_collide;
        self.store.apply_pairs(&self.grid, range, |me, you, d, _, acc| {
            match (me.tag, you.tag) {
                (RUNNER, RUNNER) => acc.reward += p.proximity_weight * p.proximity.eval(d, range),
                (RUNNER, CHASER) if d < touch => {
                    acc.reward -= p.r_touch;
                    acc.touches += 1;
                }
                (CHASER, RUNNER) if d < touch => {
                    acc.reward += p.r_touch;
                    acc.touches += 1;
                }
                _ => {}
            }
            Ok(())
        })?;
        self.store.commit();
        self.observe()?;
        Ok(&self.output)
    }
}

impl MultiAgentEnv for TagEnv {
    fn num_agents(&self) -> usize {
        self.params.n()
    }

    fn obs_dim(&self) -> usize {
        self.params.obs_dim()
    }

    fn groups(&self) -> &[PolicyGroup] {
        &self.groups
    }

    fn output(&self) -> &EnvOutput {
        &self.output
    }

    fn step(&mut self, actions: &[f32]) -> Result<&EnvOutput, EnvError> {
        TagEnv::step(self, actions)
    }

    fn snapshot(&self, step: u64) -> Vec<SnapshotRow> {
        let s = &self.store;
        (0..s.len())
            .map(|i| SnapshotRow {
                step,
                agent: i,
                kind: if s.tags()[i] == CHASER { "chaser" } else { "runner" }.into(),
                x: s.positions()[i].x,
                y: s.positions()[i].y,
                heading: s.headings()[i],
                speed: s.speeds()[i],
                reward: self.output.rewards[i],
            })
            .collect()
    }

    fn views(&self) -> &ViewBuffer {
        &self.views
    }

    fn state(&self) -> EnvState {
        EnvState::capture(&self.store)
    }

    fn restore(&mut self, state: &EnvState) -> Result<(), EnvError> {
        let store = state.to_store(self.params.world)?;
        *self = Self::from_store(self.params, store)?;
        Ok(())
    }
}
