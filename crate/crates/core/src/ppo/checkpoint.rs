//! JSON checkpoints. Values are stored as f64, which represents every f32
//! exactly, so a save/load round trip is lossless.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ActorCritic, Learner, PpoConfig, PpoError, TensorSpec};
use crate::env::{EnvState, PolicyGroup};

pub const FORMAT: &str = "flockrl-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// One learner's full training state, plus optionally the environment state
/// needed to continue the run exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub policy: String,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub hidden: usize,
    pub parameter_count: usize,
    pub training_step: u64,
    pub config: PpoConfig,
    pub parameters: Vec<NamedTensor>,
    pub adam_step: u64,
    pub adam_m: Vec<NamedTensor>,
    pub adam_v: Vec<NamedTensor>,
    pub rng: ChaCha8Rng,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_state: Option<EnvState>,
}

fn split(specs: &[TensorSpec], flat: &[f32]) -> Vec<NamedTensor> {
    specs
        .iter()
        .map(|s| NamedTensor {
            name: s.name.clone(),
            shape: s.shape.clone(),
            data: flat[s.offset..s.offset + s.len()].iter().map(|&v| v as f64).collect(),
        })
        .collect()
}

fn join(specs: &[TensorSpec], tensors: &[NamedTensor], what: &str) -> Result<Vec<f32>, PpoError> {
    if specs.len() != tensors.len() {
        return Err(PpoError::Checkpoint(format!(
            "{what}: {} tensors, expected {}",
            tensors.len(),
            specs.len()
        )));
    }
    let mut flat = Vec::new();
    for (s, t) in specs.iter().zip(tensors) {
        if s.name != t.name || s.shape != t.shape || t.data.len() != s.len() {
            return Err(PpoError::Checkpoint(format!(
                "{what}: tensor `{}` {:?} does not match expected `{}` {:?}",
                t.name, t.shape, s.name, s.shape
            )));
        }
        flat.extend(t.data.iter().map(|&v| v as f32));
    }
    Ok(flat)
}

impl Checkpoint {
    pub fn capture(learner: &Learner, config: &PpoConfig, training_step: u64, env_state: Option<EnvState>) -> Self {
        let p = &learner.policy;
        let specs = p.specs();
        let (m, v) = learner.adam.moments();
        Self {
            format: FORMAT.into(),
            policy: learner.name.clone(),
            obs_dim: p.obs_dim(),
            action_dim: p.action_dim(),
            hidden: p.hidden(),
            parameter_count: p.parameter_count(),
            training_step,
            config: *config,
            parameters: split(specs, p.params()),
            adam_step: learner.adam.step_count(),
            adam_m: split(specs, m),
            adam_v: split(specs, v),
            rng: learner.rng.clone(),
            env_state,
        }
    }

    pub fn policy_network(&self) -> Result<ActorCritic<f32>, PpoError> {
        if self.format != FORMAT {
            return Err(PpoError::Checkpoint(format!("unknown format `{}`", self.format)));
        }
        let mut net = ActorCritic::zeros(self.obs_dim, self.action_dim, self.hidden);
        let flat = join(net.specs(), &self.parameters, "parameters")?;
        net.set_params(flat)?;
        Ok(net)
    }

    /// Rebuilds the learner for `group` with optimizer and RNG state.
    pub fn restore_learner(&self, group: &PolicyGroup, index: usize) -> Result<Learner, PpoError> {
        if group.name != self.policy {
            return Err(PpoError::Checkpoint(format!(
                "checkpoint holds policy `{}`, expected `{}`",
                self.policy, group.name
            )));
        }
        let net = self.policy_network()?;
        let specs = net.specs().to_vec();
        let mut learner = Learner::with_policy(group, index, net, &self.config);
        learner.adam.restore(
            self.adam_step,
            join(&specs, &self.adam_m, "adam_m")?,
            join(&specs, &self.adam_v, "adam_v")?,
        )?;
        learner.rng = self.rng.clone();
        Ok(learner)
    }

    pub fn save(&self, path: &Path) -> Result<(), PpoError> {
        let text = serde_json::to_string(self).map_err(|e| PpoError::Checkpoint(e.to_string()))?;
        fs::write(path, text).map_err(|e| PpoError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, PpoError> {
        let text = fs::read_to_string(path).map_err(|e| PpoError::Checkpoint(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| PpoError::Checkpoint(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{FlockEnv, FlockParams, MultiAgentEnv};
    use crate::geometry::WorldSpec;
    use crate::ppo::Trainer;

    fn env() -> FlockEnv {
        let params = FlockParams {
            n: 8,
            world: WorldSpec::new(30.0, 30.0),
            sectors: 16,
            ..FlockParams::default()
        };
        FlockEnv::reset(params, 3).unwrap()
    }

    fn cfg() -> PpoConfig {
        PpoConfig {
            training_steps: 4,
            rollout_steps: 16,
            minibatch_size: 32,
            hidden: 8,
            seed: 9,
            ..PpoConfig::default()
        }
    }

    #[test]
    fn resumed_run_is_bitwise_identical() {
        let mut full = Trainer::new(env(), cfg()).unwrap();
        let full_hist = full.train(|_, _| Ok(())).unwrap();

        let mut first = Trainer::new(env(), cfg()).unwrap();
        first.train_step().unwrap();
        first.train_step().unwrap();
        let ck = Checkpoint::capture(&first.learners()[0], first.config(), 2, Some(first.env().state()));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        ck.save(&path).unwrap();

        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded, ck);
        let mut e = env();
        e.restore(loaded.env_state.as_ref().unwrap()).unwrap();
        let learner = loaded.restore_learner(&e.groups()[0], 0).unwrap();
        let mut resumed = Trainer::from_parts(e, vec![learner], loaded.config, loaded.training_step).unwrap();
        let tail = resumed.train(|_, _| Ok(())).unwrap();
        assert_eq!(tail.len(), 2);
        for (a, b) in full_hist[2..].iter().zip(&tail) {
            assert_eq!(a.training_step, b.training_step);
            assert_eq!(a.mean_reward.to_bits(), b.mean_reward.to_bits());
            assert_eq!(a.policy_loss.to_bits(), b.policy_loss.to_bits());
        }
        assert_eq!(
            full.learners()[0].policy.params(),
            resumed.learners()[0].policy.params()
        );
    }

    #[test]
    fn wrong_group_rejected() {
        let t = Trainer::new(env(), cfg()).unwrap();
        let ck = Checkpoint::capture(&t.learners()[0], t.config(), 0, None);
        let mut g = t.env().groups()[0].clone();
        g.name = "runner".into();
        assert!(ck.restore_learner(&g, 0).is_err());
    }
}
