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

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlockParams {
    pub n: usize,
    pub world: WorldSpec,
    pub body_radius: f32,
    pub sectors: usize,
    /// Field of view, radians.
    pub fov: f32,
    pub view_range: f32,
    pub s_min: f32,
    pub s_max: f32,
    pub a_max: f32,
    pub theta_max: f32,
    pub reward: RewardShape,
}

impl Default for FlockParams {
    fn default() -> Self {
        let body_radius = 0.25;
        Self {
            n: 512,
            world: WorldSpec::new(100.0, 100.0),
            body_radius,
            sectors: 128,
            fov: 250f32.to_radians(),
            view_range: 10.0,
            s_min: 0.05,
            s_max: 0.5,
            a_max: 0.1,
            theta_max: 0.2,
            reward: RewardShape::new(1.0, 0.5, body_radius),
        }
    }
}

impl FlockParams {
    pub fn view(&self) -> ViewConfig {
        ViewConfig {
            sectors: self.sectors,
            fov: self.fov,
            range: self.view_range,
            channels: 1,
            body_radius: self.body_radius,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.sectors + 1
    }

    pub fn bounds(&self) -> [ActionBound; 2] {
        [
            ActionBound::new(-self.a_max, self.a_max),
            ActionBound::new(-self.theta_max, self.theta_max),
        ]
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.n == 0 {
            return config_err("n", "at least one agent is required");
        }
        if !self.world.is_valid() {
            return config_err("world", "width and height must be positive");
        }
        if !(self.s_min >= 0.0 && self.s_min < self.s_max) {
            return config_err(
                "s_min",
                format!("need 0 <= s_min < s_max, got {} / {}", self.s_min, self.s_max),
            );
        }
        if !(self.a_max > 0.0) {
            return config_err("a_max", "must be positive");
        }
        if !(self.theta_max > 0.0 && self.theta_max <= PI) {
            return config_err("theta_max", format!("must lie in (0, pi], got {}", self.theta_max));
        }
        if !(self.body_radius > 0.0) {
            return config_err("body_radius", "must be positive");
        }
        if !(2.0 * self.body_radius < self.view_range) {
            return config_err("view_range", "must exceed twice the body radius");
        }
        if !(self.reward.c_collide > 0.0 && self.reward.c_near > 0.0) {
            return config_err("c_collide", "reward magnitudes must be positive");
        }
        if self.reward.d_collide != 2.0 * self.body_radius {
            return config_err("reward", "collision distance must equal twice the body radius");
        }
        if self.query_radius() > 0.5 * self.world.width.min(self.world.height) {
            return config_err("view_range", "view range must be under half the world extent");
        }
        self.view().validate().map_err(|e| EnvError::Config {
            field: "view",
            message: e.to_string(),
        })
    }

    fn query_radius(&self) -> f32 {
        self.view_range + self.body_radius
    }
}

/// `clamp(s + a, s_min, s_max)`.
#[inline]
pub fn update_speed(speed: f32, accel: f32, params: &FlockParams) -> f32 {
    (speed + accel).clamp(params.s_min, params.s_max)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FlockAgent {
    pub reward: f32,
}

/// Flocking task: every agent earns the proximity reward summed over its
/// neighbors within view range. Observation is the 1-channel view followed by
/// speed / s_max; actions are (acceleration, turn).
#[derive(Debug, Clone)]
pub struct FlockEnv {
    params: FlockParams,
    view: ViewConfig,
    store: AgentStore<FlockAgent>,
    grid: SpatialGrid,
    views: ViewBuffer,
    output: EnvOutput,
    groups: Vec<PolicyGroup>,
}

impl FlockEnv {
    /// Uniform random placement and headings, mid-range speed.
    pub fn reset(params: FlockParams, seed: u64) -> Result<Self, EnvError> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = params.n;
        let mut positions = Vec::with_capacity(n);
        let mut headings = Vec::with_capacity(n);
        for _ in 0..n {
            let x = rng.random_range(0.0..params.world.width);
            let y = rng.random_range(0.0..params.world.height);
            positions.push(Vec2::new(x, y));
            headings.push(rng.random_range(0.0..TAU));
        }
        let speeds = vec![0.5 * (params.s_min + params.s_max); n];
        let store = AgentStore::new(params.world, positions, headings, speeds, vec![0; n])?;
        Self::from_store(params, store)
    }

    /// Wraps an explicitly placed population. Rewards start at zero.
    pub fn from_store(params: FlockParams, mut store: AgentStore<FlockAgent>) -> Result<Self, EnvError> {
        params.validate()?;
        if store.len() != params.n {
            return config_err("n", format!("store holds {} agents", store.len()));
        }
        store.apply_self(|_, w| {
            w.extra.reward = 0.0;
            Ok(())
        })?;
        store.commit();
        let view = params.view();
        let grid = SpatialGrid::build(store.positions(), &params.world, params.query_radius())?;
        let groups = vec![PolicyGroup {
            name: "flock".into(),
            agents: (0..params.n).collect(),
            bounds: params.bounds().to_vec(),
        }];
        let mut env = Self {
            params,
            view,
            views: ViewBuffer::new(params.n, &view),
            grid,
            store,
            output: EnvOutput {
                obs_dim: params.obs_dim(),
                observations: vec![0.0; params.n * params.obs_dim()],
                rewards: vec![0.0; params.n],
            },
            groups,
        };
        env.observe()?;
        Ok(env)
    }

    pub fn params(&self) -> &FlockParams {
        &self.params
    }

    pub fn store(&self) -> &AgentStore<FlockAgent> {
        &self.store
    }

    pub fn views(&self) -> &ViewBuffer {
        &self.views
    }

    fn observe(&mut self) -> Result<(), EnvError> {
        compute_views_into(&self.store, &self.grid, &self.view, &[0], &mut self.views)?;
        let v = self.params.sectors;
        let dim = self.params.obs_dim();
        let s_max = self.params.s_max;
        for (i, (obs, &speed)) in self
            .output
            .observations
            .chunks_exact_mut(dim)
            .zip(self.store.speeds())
            .enumerate()
        {
            obs[..v].copy_from_slice(self.views.row(i));
            obs[v] = speed / s_max;
        }
        for (r, a) in self.output.rewards.iter_mut().zip(self.store.extras()) {
            *r = a.reward;
        }
        Ok(())
    }

    pub fn step(&mut self, actions: &[f32]) -> Result<&EnvOutput, EnvError> {
        let p = self.params;
        check_actions(actions, p.n, 2)?;
        let [accel_bound, turn_bound] = p.bounds();
        self.store.apply_self(|me, w| {
            let a = &actions[2 * me.index..2 * me.index + 2];
            let heading = normalize_angle(me.heading + turn_bound.clip(a[1]));
            let speed = update_speed(me.speed, accel_bound.clip(a[0]), &p);
            *w.heading = heading;
            *w.speed = speed;
            *w.pos = me.pos + Vec2::from_angle(heading) * speed;
            w.extra.reward = 0.0;
            Ok(())
        })?;
        self.store.commit();
        self.grid = SpatialGrid::build(self.store.positions(), &p.world, p.query_radius())?;
        let range = p.view_range;
        let shape = p.reward;
        self.store.apply_pairs(&self.grid, range, |_, _, d, _, acc| {
            acc.reward += shape.eval(d, range);
            Ok(())
        })?;
        self.store.commit();
        self.observe()?;
        Ok(&self.output)
    }
}

impl MultiAgentEnv for FlockEnv {
    fn num_agents(&self) -> usize {
        self.params.n
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
        FlockEnv::step(self, actions)
    }

    fn snapshot(&self, step: u64) -> Vec<SnapshotRow> {
        let s = &self.store;
        (0..s.len())
            .map(|i| SnapshotRow {
                step,
                agent: i,
                kind: "boid".into(),
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
