use serde::{Deserialize, Serialize};

use super::PpoError;

/// Training schedule and optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    /// Training steps per run.
    pub training_steps: usize,
    /// Environment steps collected per training step.
    pub rollout_steps: usize,
    /// Passes over the collected samples per training step.
    pub epochs: usize,
    pub minibatch_size: usize,
    /// Cap on minibatches per epoch.
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
    /// Width of both hidden layers.
    pub hidden: usize,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            training_steps: 200,
            rollout_steps: 128,
            epochs: 2,
            minibatch_size: 512,
            max_minibatches: 512,
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            lr: 3e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            value_coef: 0.5,
            entropy_coef: 0.0,
            hidden: 64,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |field: &'static str, message: &str| {
            Err(PpoError::Config {
                field,
                message: message.to_owned(),
            })
        };
        if self.rollout_steps == 0 {
            return bad("rollout_steps", "must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be positive");
        }
        if self.minibatch_size == 0 {
            return bad("minibatch_size", "must be positive");
        }
        if self.max_minibatches == 0 {
            return bad("max_minibatches", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda", "must lie in [0, 1]");
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return bad("clip", "must lie in (0, 1)");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr", "must be finite and non-negative");
        }
        if !((0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2)) {
            return bad("adam_beta1", "Adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps", "must be positive");
        }
        if !(self.value_coef >= 0.0 && self.entropy_coef >= 0.0) {
            return bad("value_coef", "loss coefficients must be non-negative");
        }
        if self.hidden == 0 {
            return bad("hidden", "must be positive");
        }
        Ok(())
    }

    /// Minibatches per epoch for `samples` collected transitions:
    /// `min(floor(samples / minibatch_size), max_minibatches)`.
    pub fn minibatches_per_epoch(&self, samples: usize) -> Result<usize, PpoError> {
        if samples < self.minibatch_size {
            return Err(PpoError::Config {
                field: "minibatch_size",
                message: format!(
                    "only {samples} samples per training step, fewer than one minibatch of {}",
                    self.minibatch_size
                ),
            });
        }
        Ok((samples / self.minibatch_size).min(self.max_minibatches))
    }
}
