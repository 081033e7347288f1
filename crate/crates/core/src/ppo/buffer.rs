use ndarray::{s, Array2, Array3, ArrayView1, ArrayView2};

use super::{gae, PpoError};

/// Per-agent trajectories of one policy group over `t` environment steps.
///
/// Agent-major: sample `(i, k)` is agent `i` at step `k`, flat index `i * t + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBuffer {
    pub observations: Array3<f32>,
    /// Raw (unclipped) sampled actions.
    pub actions: Array3<f32>,
    pub log_probs: Array2<f32>,
    pub rewards: Array2<f32>,
    /// `n x (t + 1)`; the last column is the bootstrap value.
    pub values: Array2<f32>,
    pub advantages: Array2<f32>,
    pub returns: Array2<f32>,
}

impl TrajectoryBuffer {
    pub fn new(n: usize, t: usize, obs_dim: usize, action_dim: usize) -> Self {
        Self {
            observations: Array3::zeros((n, t, obs_dim)),
            actions: Array3::zeros((n, t, action_dim)),
            log_probs: Array2::zeros((n, t)),
            rewards: Array2::zeros((n, t)),
            values: Array2::zeros((n, t + 1)),
            advantages: Array2::zeros((n, t)),
            returns: Array2::zeros((n, t)),
        }
    }

    pub fn agents(&self) -> usize {
        self.rewards.nrows()
    }

    pub fn steps(&self) -> usize {
        self.rewards.ncols()
    }

    /// `m = n * t`.
    pub fn samples(&self) -> usize {
        self.rewards.len()
    }

    pub(crate) fn record_policy(
        &mut self,
        k: usize,
        obs: ArrayView2<'_, f32>,
        actions: ArrayView2<'_, f32>,
        log_probs: ArrayView1<'_, f32>,
        values: ArrayView1<'_, f32>,
    ) {
        self.observations.slice_mut(s![.., k, ..]).assign(&obs);
        self.actions.slice_mut(s![.., k, ..]).assign(&actions);
        self.log_probs.column_mut(k).assign(&log_probs);
        self.values.column_mut(k).assign(&values);
    }

    pub fn mean_reward(&self) -> f64 {
        self.rewards.iter().map(|&r| r as f64).sum::<f64>() / self.samples().max(1) as f64
    }

    pub fn compute_gae(&mut self, gamma: f64, lambda: f64) -> Result<(), PpoError> {
        let (adv, ret) = gae(self.rewards.view(), self.values.view(), gamma as f32, lambda as f32)?;
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }

    /// Observations as `m x obs_dim`.
    pub fn flat_observations(&self) -> ArrayView2<'_, f32> {
        let (n, t, d) = self.observations.dim();
        self.observations
            .view()
            .into_shape_with_order((n * t, d))
            .expect("contiguous")
    }

    pub fn flat_actions(&self) -> ArrayView2<'_, f32> {
        let (n, t, d) = self.actions.dim();
        self.actions
            .view()
            .into_shape_with_order((n * t, d))
            .expect("contiguous")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn agent_major_flattening() {
        let mut b = TrajectoryBuffer::new(2, 3, 1, 2);
        for k in 0..3 {
            let obs = array![[k as f32], [10.0 + k as f32]];
            let act = Array2::zeros((2, 2));
            b.record_policy(
                k,
                obs.view(),
                act.view(),
                array![0.0, 0.0].view(),
                array![0.0, 0.0].view(),
            );
        }
        let flat = b.flat_observations();
        assert_eq!(flat.column(0).to_vec(), vec![0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        assert_eq!(b.samples(), 6);
    }
}
