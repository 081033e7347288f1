use ndarray::{Array2, ArrayView2};

use super::{PpoError, Real};

/// Generalized advantage estimates for a continuing task.
///
/// `rewards` is `n x t`, `values` is `n x (t + 1)` with the bootstrap value in
/// the last column. Returns `(advantages, returns)`, both `n x t`.
pub fn gae<F: Real>(
    rewards: ArrayView2<'_, F>,
    values: ArrayView2<'_, F>,
    gamma: F,
    lambda: F,
) -> Result<(Array2<F>, Array2<F>), PpoError> {
    let (n, t) = rewards.dim();
    if values.dim() != (n, t + 1) {
        return Err(PpoError::Shape(format!(
            "values are {:?}, expected ({n}, {})",
            values.dim(),
            t + 1
        )));
    }
    let mut adv = Array2::zeros((n, t));
    for i in 0..n {
        let mut running = F::zero();
        for k in (0..t).rev() {
            let delta = rewards[[i, k]] + gamma * values[[i, k + 1]] - values[[i, k]];
            running = delta + gamma * lambda * running;
            adv[[i, k]] = running;
        }
    }
    let returns = &adv + &values.slice(ndarray::s![.., ..t]);
    Ok((adv, returns))
}

/// Direct `O(t^2)` summation of discounted TD residuals. Reference only.
pub fn gae_reference(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let t = rewards.len();
    assert_eq!(values.len(), t + 1);
    (0..t)
        .map(|k| {
            (k..t)
                .map(|j| {
                    let delta = rewards[j] + gamma * values[j + 1] - values[j];
                    (gamma * lambda).powi((j - k) as i32) * delta
                })
                .sum()
        })
        .collect()
}
