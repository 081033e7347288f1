use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::HarnessError;
use crate::env::{MultiAgentEnv, TagEnv};
use crate::ppo::{uniform_actions, Learner};

/// How the chasers act during a tag evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChaserPolicy {
    Trained,
    /// Uniform random actions inside the chaser bounds.
    Random,
}

/// Mean runner-chaser contacts per step over `steps` steps from `env`.
///
/// Runners sample from the trained runner policy; chasers sample from the
/// trained chaser policy or act uniformly at random. `learners` must be the
/// runner and chaser learners in group order; their sampling streams are
/// replaced by streams derived from `seed`, so the result depends only on the
/// parameters, the start state and `seed`.
pub fn tag_touch_rate(
    mut env: TagEnv,
    learners: &[Learner],
    chasers: ChaserPolicy,
    steps: usize,
    seed: u64,
) -> Result<f64, HarnessError> {
    if learners.len() != 2 {
        return Err(HarnessError::invalid(
            "checkpoint",
            "tag needs a runner and a chaser policy",
        ));
    }
    let mut learners = learners.to_vec();
    for (k, l) in learners.iter_mut().enumerate() {
        l.rng = ChaCha8Rng::seed_from_u64(seed);
        l.rng.set_stream(500 + k as u64);
    }
    let mut random = ChaCha8Rng::seed_from_u64(seed);
    random.set_stream(600);
    let n = env.num_agents();
    let obs_dim = env.obs_dim();
    let mut actions = vec![0.0f32; 2 * n];
    let mut total = 0u64;
    for _ in 0..steps {
        for (k, l) in learners.iter_mut().enumerate() {
            let a = if k == 1 && chasers == ChaserPolicy::Random {
                uniform_actions(l.agents.len(), &l.bounds, &mut random)
            } else {
                let obs = l.gather_observations(&env.output().observations, obs_dim);
                l.act(&obs, false)?
            };
            for (row, &i) in a.rows().into_iter().zip(&l.agents) {
                actions[2 * i] = row[0];
                actions[2 * i + 1] = row[1];
            }
        }
        env.step(&actions)?;
        total += env.touches();
    }
    Ok(total as f64 / steps.max(1) as f64)
}
