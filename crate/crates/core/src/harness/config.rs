use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::HarnessError;
use crate::env::{FlockParams, RewardShape, TagParams};
use crate::geometry::WorldSpec;
use crate::ppo::{ActorCritic, PpoConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Flock,
    Tag,
    Opinion,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Flock => "flock",
            Self::Tag => "tag",
            Self::Opinion => "opinion",
        }
    }
}

/// How the benchmark world grows with the agent count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityMode {
    /// World stays at the configured size.
    FixedWorld,
    /// World area scales with `n` to keep the configured density.
    FixedDensity,
}

impl DensityMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::FixedWorld => "fixed-world",
            Self::FixedDensity => "fixed-density",
        }
    }
}

/// Flat run configuration. Every key is optional in the JSON file; missing
/// keys take the defaults below and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub environment: EnvKind,
    pub seed: u64,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    pub output_dir: Option<PathBuf>,

    pub world_width: f32,
    pub world_height: f32,
    pub body_radius: f32,
    /// Sectors per view channel; unset uses 128 for flock and 64 for tag.
    pub sectors: Option<usize>,
    pub fov_degrees: f32,
    pub view_range: f32,
    pub c_collide: f32,
    pub c_near: f32,

    /// Flock agent count.
    pub n: usize,
    pub s_min: f32,
    pub s_max: f32,
    pub a_max: f32,
    pub theta_max: f32,

    pub n_runners: usize,
    pub n_chasers: usize,
    pub s_max_runner: f32,
    pub s_max_chaser: f32,
    pub r_touch: f32,
    pub proximity_weight: f32,

    pub training_steps: usize,
    pub rollout_steps: usize,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub max_minibatches: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub hidden: usize,

    pub opinion_agents: usize,
    pub opinion_threshold: f64,
    pub opinion_strength: f64,
    pub opinion_steps: usize,

    pub bench_counts: Vec<usize>,
    pub bench_steps: usize,
    /// Training steps timed per benchmark point; 0 skips training.
    pub bench_train_steps: usize,
    pub density_mode: DensityMode,

    pub snapshot_steps: usize,
    pub snapshot_agent: usize,
    /// Also write PNG renderings of snapshots.
    pub render: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let flock = FlockParams::default();
        let tag = TagParams::default();
        let ppo = PpoConfig::default();
        Self {
            environment: EnvKind::Flock,
            seed: 0,
            workers: 0,
            output_dir: None,
            world_width: flock.world.width,
            world_height: flock.world.height,
            body_radius: flock.body_radius,
            sectors: None,
            fov_degrees: flock.fov.to_degrees().round(),
            view_range: flock.view_range,
            c_collide: flock.reward.c_collide,
            c_near: flock.reward.c_near,
            n: flock.n,
            s_min: flock.s_min,
            s_max: flock.s_max,
            a_max: flock.a_max,
            theta_max: flock.theta_max,
            n_runners: tag.n_runners,
            n_chasers: tag.n_chasers,
            s_max_runner: tag.s_max_runner,
            s_max_chaser: tag.s_max_chaser,
            r_touch: tag.r_touch,
            proximity_weight: tag.proximity_weight,
            training_steps: ppo.training_steps,
            rollout_steps: ppo.rollout_steps,
            epochs: ppo.epochs,
            minibatch_size: ppo.minibatch_size,
            max_minibatches: ppo.max_minibatches,
            gamma: ppo.gamma,
            lambda: ppo.lambda,
            clip: ppo.clip,
            lr: ppo.lr,
            adam_beta1: ppo.adam_beta1,
            adam_beta2: ppo.adam_beta2,
            adam_eps: ppo.adam_eps,
            value_coef: ppo.value_coef,
            entropy_coef: ppo.entropy_coef,
            hidden: ppo.hidden,
            opinion_agents: 100,
            opinion_threshold: 0.3,
            opinion_strength: 0.5,
            opinion_steps: 50,
            bench_counts: vec![1000, 2000, 4000, 8000],
            bench_steps: 50,
            bench_train_steps: 1,
            density_mode: DensityMode::FixedWorld,
            snapshot_steps: 100,
            snapshot_agent: 0,
            render: false,
        }
    }
}

/// Per-policy sample accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPlan {
    pub name: String,
    pub agents: usize,
    /// Samples per training step, `n * t`.
    pub samples: usize,
    /// Minibatches per epoch.
    pub minibatches: usize,
    /// Minibatch updates over the whole run, `T * p * b`.
    pub total_updates: usize,
}

/// Quantities derived from a valid configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Derived {
    pub environment: EnvKind,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub parameter_count: usize,
    pub groups: Vec<GroupPlan>,
}

impl std::fmt::Display for Derived {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "environment={}", self.environment.name())?;
        if self.environment == EnvKind::Opinion {
            return Ok(());
        }
        writeln!(f, "obs_dim={}", self.obs_dim)?;
        writeln!(f, "action_dim={}", self.action_dim)?;
        writeln!(f, "parameters_per_policy={}", self.parameter_count)?;
        for g in &self.groups {
            writeln!(
                f,
                "policy={} agents={} m={} b={} total_updates={}",
                g.name, g.agents, g.samples, g.minibatches, g.total_updates
            )?;
        }
        Ok(())
    }
}

fn parse_error(e: serde_json::Error) -> HarnessError {
    let msg = e.to_string();
    let field = msg
        .split('`')
        .nth(1)
        .filter(|_| msg.starts_with("unknown field") || msg.starts_with("invalid"))
        .unwrap_or("config")
        .to_owned();
    HarnessError::invalid(field, msg)
}

impl RunConfig {
    /// Parses JSON text and applies `key=value` overrides. Override values
    /// are read as JSON when they parse, as strings otherwise.
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self, HarnessError> {
        let mut value: Value = if text.trim().is_empty() {
            Value::Object(Map::new())
        } else {
            serde_json::from_str(text).map_err(parse_error)?
        };
        let obj = value
            .as_object_mut()
            .ok_or_else(|| HarnessError::invalid("config", "top level must be a JSON object"))?;
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| HarnessError::invalid(o.clone(), "override must look like key=value"))?;
            let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
            obj.insert(key.trim().to_owned(), parsed);
        }
        serde_json::from_value(value).map_err(parse_error)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, HarnessError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(super::io_err(p))?,
            None => String::new(),
        };
        Self::from_json(&text, overrides)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn world(&self) -> WorldSpec {
        WorldSpec::new(self.world_width, self.world_height)
    }

    pub fn flock_params(&self) -> FlockParams {
        FlockParams {
            n: self.n,
            world: self.world(),
            body_radius: self.body_radius,
            sectors: self.sectors.unwrap_or(128),
            fov: self.fov_degrees.to_radians(),
            view_range: self.view_range,
            s_min: self.s_min,
            s_max: self.s_max,
            a_max: self.a_max,
            theta_max: self.theta_max,
            reward: RewardShape::new(self.c_collide, self.c_near, self.body_radius),
        }
    }

    pub fn tag_params(&self) -> TagParams {
        TagParams {
            n_runners: self.n_runners,
            n_chasers: self.n_chasers,
            world: self.world(),
            body_radius: self.body_radius,
            sectors: self.sectors.unwrap_or(64),
            fov: self.fov_degrees.to_radians(),
            view_range: self.view_range,
            s_max_runner: self.s_max_runner,
            s_max_chaser: self.s_max_chaser,
            theta_max: self.theta_max,
            r_touch: self.r_touch,
            proximity: RewardShape::new(self.c_collide, self.c_near, self.body_radius),
            proximity_weight: self.proximity_weight,
        }
    }

    pub fn ppo(&self) -> PpoConfig {
        PpoConfig {
            training_steps: self.training_steps,
            rollout_steps: self.rollout_steps,
            epochs: self.epochs,
            minibatch_size: self.minibatch_size,
            max_minibatches: self.max_minibatches,
            gamma: self.gamma,
            lambda: self.lambda,
            clip: self.clip,
            lr: self.lr,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
            hidden: self.hidden,
            seed: self.seed,
        }
    }

    /// Checks the environment parameters only. Returns the policy groups as
    /// `(name, agents)` and the observation width.
    pub fn validate_env(&self) -> Result<(Vec<(String, usize)>, usize), HarnessError> {
        if !(self.fov_degrees > 0.0 && self.fov_degrees <= 360.0) {
            return Err(HarnessError::invalid("fov_degrees", "must lie in (0, 360]"));
        }
        match self.environment {
            EnvKind::Flock => {
                let p = self.flock_params();
                p.validate()?;
                Ok((vec![("flock".to_owned(), p.n)], p.obs_dim()))
            }
            EnvKind::Tag => {
                let p = self.tag_params();
                p.validate()?;
                Ok((
                    vec![("runner".to_owned(), p.n_runners), ("chaser".to_owned(), p.n_chasers)],
                    p.obs_dim(),
                ))
            }
            EnvKind::Opinion => {
                if self.opinion_agents == 0 {
                    return Err(HarnessError::invalid("opinion_agents", "must be positive"));
                }
                if !(self.opinion_threshold >= 0.0 && self.opinion_threshold.is_finite()) {
                    return Err(HarnessError::invalid("opinion_threshold", "must be non-negative"));
                }
                if !(0.0..=1.0).contains(&self.opinion_strength) {
                    return Err(HarnessError::invalid("opinion_strength", "must lie in [0, 1]"));
                }
                Ok((Vec::new(), 0))
            }
        }
    }

    /// Checks every parameter the selected environment and trainer use.
    pub fn validate(&self) -> Result<Derived, HarnessError> {
        let (groups, obs_dim) = self.validate_env()?;
        if self.environment == EnvKind::Opinion {
            return Ok(Derived {
                environment: self.environment,
                obs_dim: 0,
                action_dim: 0,
                parameter_count: 0,
                groups: Vec::new(),
            });
        }
        let ppo = self.ppo();
        ppo.validate()?;
        let mut plans = Vec::new();
        for (name, agents) in groups {
            let samples = agents * ppo.rollout_steps;
            let minibatches = ppo.minibatches_per_epoch(samples)?;
            plans.push(GroupPlan {
                name,
                agents,
                samples,
                minibatches,
                total_updates: ppo.training_steps * ppo.epochs * minibatches,
            });
        }
        Ok(Derived {
            environment: self.environment,
            obs_dim,
            action_dim: 2,
            parameter_count: ActorCritic::<f32>::zeros(obs_dim, 2, ppo.hidden).parameter_count(),
            groups: plans,
        })
    }
}
