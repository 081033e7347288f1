use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    normalize_advantages, ppo_loss, sample_action, squash_action, ActorCritic, Adam, LossCoefs, Minibatch, PolicyInit,
    PpoConfig, PpoError, TrajectoryBuffer,
};
use crate::env::{ActionBound, MultiAgentEnv, PolicyGroup};

/// One shared policy with its optimizer and sampling stream.
#[derive(Debug, Clone)]
pub struct Learner {
    pub name: String,
    /// Agent indices driven by this policy, ascending.
    pub agents: Vec<usize>,
    pub bounds: Vec<ActionBound>,
    pub policy: ActorCritic<f32>,
    pub adam: Adam<f32>,
    pub rng: ChaCha8Rng,
}

impl Learner {
    /// Learner `index` of a run seeded with `seed`. Initialization and
    /// sampling use separate ChaCha streams.
    pub fn new(group: &PolicyGroup, index: usize, obs_dim: usize, cfg: &PpoConfig) -> Self {
        let bounds: Vec<(f64, f64)> = group.bounds.iter().map(|b| (b.lo as f64, b.hi as f64)).collect();
        let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        init_rng.set_stream(1000 + index as u64);
        let policy = ActorCritic::new(
            obs_dim,
            group.bounds.len(),
            cfg.hidden,
            &PolicyInit::for_bounds(&bounds),
            init_rng.next_u64(),
        );
        Self::with_policy(group, index, policy, cfg)
    }

    pub fn with_policy(group: &PolicyGroup, index: usize, policy: ActorCritic<f32>, cfg: &PpoConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1 + index as u64);
        Self {
            name: group.name.clone(),
            agents: group.agents.clone(),
            bounds: group.bounds.clone(),
            adam: Adam::new(
                policy.parameter_count(),
                cfg.lr,
                cfg.adam_beta1,
                cfg.adam_beta2,
                cfg.adam_eps,
            ),
            policy,
            rng,
        }
    }

    /// Rows of the full observation matrix belonging to this learner.
    pub fn gather_observations(&self, observations: &[f32], obs_dim: usize) -> Array2<f32> {
        let mut out = Array2::zeros((self.agents.len(), obs_dim));
        for (mut row, &i) in out.rows_mut().into_iter().zip(&self.agents) {
            row.assign(&ndarray::ArrayView1::from(
                &observations[i * obs_dim..(i + 1) * obs_dim],
            ));
        }
        out
    }

    /// Bounded actions for this learner's agents: the policy mean when
    /// `deterministic`, otherwise a sample from its own stream.
    pub fn act(&mut self, obs: &Array2<f32>, deterministic: bool) -> Result<Array2<f32>, PpoError> {
        let out = self.policy.forward(obs.view())?;
        let raw = if deterministic {
            out.mean
        } else {
            sample_action(out.mean.view(), self.policy.log_std(), &mut self.rng).0
        };
        Ok(squash_action(raw.view(), &self.bounds))
    }

    fn scatter(&self, actions: &Array2<f32>, full: &mut [f32]) {
        let dim = actions.ncols();
        for (row, &i) in actions.rows().into_iter().zip(&self.agents) {
            for (d, &v) in row.iter().enumerate() {
                full[i * dim + d] = v;
            }
        }
    }
}

/// Per-learner metrics of one training step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub training_step: u64,
    pub policy: String,
    pub wall_ms_env: f64,
    pub wall_ms_update: f64,
    pub mean_reward: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    /// Minibatch updates applied (`p * b`).
    pub updates: usize,
}

/// Steps `env` `t` times with every learner acting on its own agents and
/// returns one buffer per learner. Parameters are read-only throughout.
pub fn collect_rollout<E: MultiAgentEnv + ?Sized>(
    env: &mut E,
    learners: &mut [Learner],
    t: usize,
) -> Result<Vec<TrajectoryBuffer>, PpoError> {
    let n = env.num_agents();
    let obs_dim = env.obs_dim();
    let a_dim = env.action_dim();
    let mut buffers: Vec<TrajectoryBuffer> = learners
        .iter()
        .map(|l| TrajectoryBuffer::new(l.agents.len(), t, obs_dim, a_dim))
        .collect();
    let mut actions = vec![0.0f32; n * a_dim];
    for k in 0..t {
        for (l, buf) in learners.iter_mut().zip(&mut buffers) {
            let obs = l.gather_observations(&env.output().observations, obs_dim);
            let out = l.policy.forward(obs.view())?;
            let (raw, log_prob) = sample_action(out.mean.view(), l.policy.log_std(), &mut l.rng);
            l.scatter(&squash_action(raw.view(), &l.bounds), &mut actions);
            buf.record_policy(k, obs.view(), raw.view(), log_prob.view(), out.value.view());
        }
        let out = env.step(&actions)?;
        for (l, buf) in learners.iter().zip(&mut buffers) {
            for (j, &i) in l.agents.iter().enumerate() {
                buf.rewards[[j, k]] = out.rewards[i];
            }
        }
    }
    for (l, buf) in learners.iter().zip(&mut buffers) {
        let obs = l.gather_observations(&env.output().observations, obs_dim);
        let v = l.policy.forward(obs.view())?.value;
        buf.values.column_mut(t).assign(&v);
    }
    Ok(buffers)
}

/// Runs PPO on an environment with one learner per policy group.
pub struct Trainer<E> {
    env: E,
    learners: Vec<Learner>,
    config: PpoConfig,
    training_step: u64,
}

impl<E: MultiAgentEnv> Trainer<E> {
    pub fn new(env: E, config: PpoConfig) -> Result<Self, PpoError> {
        let obs_dim = env.obs_dim();
        let learners = env
            .groups()
            .iter()
            .enumerate()
            .map(|(k, g)| Learner::new(g, k, obs_dim, &config))
            .collect();
        Self::from_parts(env, learners, config, 0)
    }

    pub fn from_parts(env: E, learners: Vec<Learner>, config: PpoConfig, training_step: u64) -> Result<Self, PpoError> {
        config.validate()?;
        if learners.len() != env.groups().len() {
            return Err(PpoError::Shape(format!(
                "{} learners for {} policy groups",
                learners.len(),
                env.groups().len()
            )));
        }
        for (l, g) in learners.iter().zip(env.groups()) {
            if l.agents != g.agents || l.name != g.name {
                return Err(PpoError::Shape(format!(
                    "learner `{}` does not match group `{}`",
                    l.name, g.name
                )));
            }
            if l.policy.obs_dim() != env.obs_dim() || l.policy.action_dim() != env.action_dim() {
                return Err(PpoError::Shape(format!(
                    "policy `{}` maps {} -> {}, environment needs {} -> {}",
                    l.name,
                    l.policy.obs_dim(),
                    l.policy.action_dim(),
                    env.obs_dim(),
                    env.action_dim()
                )));
            }
            config.minibatches_per_epoch(g.agents.len() * config.rollout_steps)?;
        }
        Ok(Self {
            env,
            learners,
            config,
            training_step,
        })
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn env_mut(&mut self) -> &mut E {
        &mut self.env
    }

    pub fn learners(&self) -> &[Learner] {
        &self.learners
    }

    pub fn learners_mut(&mut self) -> &mut [Learner] {
        &mut self.learners
    }

    pub fn config(&self) -> &PpoConfig {
        &self.config
    }

    /// Training steps completed so far.
    pub fn training_step(&self) -> u64 {
        self.training_step
    }

    pub fn into_parts(self) -> (E, Vec<Learner>) {
        (self.env, self.learners)
    }

    /// Rollout, GAE, then `p` epochs of `b` shuffled minibatch updates per
    /// learner. Returns one metrics row per learner.
    pub fn train_step(&mut self) -> Result<Vec<StepMetrics>, PpoError> {
        let cfg = self.config;
        let started = Instant::now();
        let mut buffers = collect_rollout(&mut self.env, &mut self.learners, cfg.rollout_steps)?;
        let wall_ms_env = started.elapsed().as_secs_f64() * 1e3;

        let started = Instant::now();
        let mut rows = Vec::with_capacity(self.learners.len());
        for (l, buf) in self.learners.iter_mut().zip(&mut buffers) {
            buf.compute_gae(cfg.gamma, cfg.lambda)?;
            rows.push(update(l, buf, &cfg)?);
        }
        let wall_ms_update = started.elapsed().as_secs_f64() * 1e3;
        self.training_step += 1;
        for r in &mut rows {
            r.training_step = self.training_step;
            r.wall_ms_env = wall_ms_env;
            r.wall_ms_update = wall_ms_update;
        }
        Ok(rows)
    }

    /// Runs the remaining training steps, calling `on_step` after each.
    pub fn train<C>(&mut self, mut on_step: C) -> Result<Vec<StepMetrics>, PpoError>
    where
        C: FnMut(&Self, &[StepMetrics]) -> Result<(), PpoError>,
    {
        let mut history = Vec::new();
        while self.training_step < self.config.training_steps as u64 {
            let rows = self.train_step()?;
            on_step(self, &rows)?;
            history.extend(rows);
        }
        Ok(history)
    }
}

fn update(l: &mut Learner, buf: &TrajectoryBuffer, cfg: &PpoConfig) -> Result<StepMetrics, PpoError> {
    let m = buf.samples();
    let b = cfg.minibatches_per_epoch(m)?;
    let size = cfg.minibatch_size;
    let obs = buf.flat_observations();
    let actions = buf.flat_actions();
    let log_probs = Array1::from_iter(buf.log_probs.iter().copied());
    let adv = Array1::from_iter(buf.advantages.iter().copied());
    let ret = Array1::from_iter(buf.returns.iter().copied());
    let coefs = LossCoefs {
        clip: cfg.clip,
        value_coef: cfg.value_coef,
        entropy_coef: cfg.entropy_coef,
    };

    let mut order: Vec<usize> = (0..m).collect();
    let mut sums = [0.0f64; 4];
    let mut updates = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut l.rng);
        for idx in order.chunks_exact(size).take(b) {
            let mb_obs = obs.select(Axis(0), idx);
            let mb_actions = actions.select(Axis(0), idx);
            let mb_lp = log_probs.select(Axis(0), idx);
            let mut mb_adv = adv.select(Axis(0), idx);
            normalize_advantages(mb_adv.as_slice_mut().expect("contiguous"));
            let mb_ret = ret.select(Axis(0), idx);
            let mb = Minibatch {
                obs: mb_obs.view(),
                actions: mb_actions.view(),
                old_log_probs: mb_lp.view(),
                advantages: mb_adv.view(),
                returns: mb_ret.view(),
            };
            let (stats, grad) = ppo_loss(&l.policy, &mb, &coefs)?;
            l.adam.update(l.policy.params_mut(), &grad);
            l.policy.clamp_log_std();
            sums[0] += stats.policy_loss;
            sums[1] += stats.value_loss;
            sums[2] += stats.entropy;
            sums[3] += stats.clip_fraction;
            updates += 1;
        }
    }
    let k = updates as f64;
    Ok(StepMetrics {
        training_step: 0,
        policy: l.name.clone(),
        wall_ms_env: 0.0,
        wall_ms_update: 0.0,
        mean_reward: buf.mean_reward(),
        policy_loss: sums[0] / k,
        value_loss: sums[1] / k,
        entropy: sums[2] / k,
        clip_fraction: sums[3] / k,
        updates,
    })
}

/// Uniform random action inside each bound, for baselines.
pub fn uniform_actions<R: Rng>(rows: usize, bounds: &[ActionBound], rng: &mut R) -> Array2<f32> {
    Array2::from_shape_fn((rows, bounds.len()), |(_, d)| {
        let b = bounds[d];
        if b.hi > b.lo {
            rng.random_range(b.lo..=b.hi)
        } else {
            b.lo
        }
    })
}
