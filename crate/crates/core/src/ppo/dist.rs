//! Diagonal Gaussian policy head.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView2, Zip};
use rand::Rng;
use rand_distr::StandardNormal;

use super::Real;
use crate::env::ActionBound;

/// Draws `mean + exp(log_std) * z` per row and returns the raw actions with
/// their summed log-densities.
pub fn sample_action<F: Real, R: Rng + ?Sized>(
    mean: ArrayView2<'_, F>,
    log_std: &[F],
    rng: &mut R,
) -> (Array2<F>, Array1<F>) {
    assert_eq!(mean.ncols(), log_std.len());
    let std: Vec<F> = log_std.iter().map(|v| v.exp()).collect();
    let mut actions = mean.to_owned();
    for mut row in actions.rows_mut() {
        for (a, s) in row.iter_mut().zip(&std) {
            let z: f64 = rng.sample(StandardNormal);
            *a += *s * F::of(z);
        }
    }
    let lp = gaussian_log_prob(actions.view(), mean, log_std);
    (actions, lp)
}

/// `sum_d log N(a_d; mean_d, exp(log_std_d))` per row.
pub fn gaussian_log_prob<F: Real>(actions: ArrayView2<'_, F>, mean: ArrayView2<'_, F>, log_std: &[F]) -> Array1<F> {
    let half_log_2pi = F::of(0.5 * (2.0 * PI).ln());
    let half = F::of(0.5);
    let inv_std: Vec<F> = log_std.iter().map(|v| (-*v).exp()).collect();
    let mut out = Array1::zeros(actions.nrows());
    Zip::from(&mut out)
        .and(actions.rows())
        .and(mean.rows())
        .for_each(|lp, a, m| {
            let mut acc = F::zero();
            for d in 0..log_std.len() {
                let z = (a[d] - m[d]) * inv_std[d];
                acc = acc - half * z * z - log_std[d] - half_log_2pi;
            }
            *lp = acc;
        });
    out
}

/// Differential entropy of the diagonal Gaussian (state independent).
pub fn entropy<F: Real>(log_std: &[F]) -> F {
    let c = F::of(0.5 + 0.5 * (2.0 * PI).ln());
    log_std.iter().fold(F::zero(), |acc, &l| acc + c + l)
}

/// Clips each action dimension into its environment bounds.
pub fn squash_action(raw: ArrayView2<'_, f32>, bounds: &[ActionBound]) -> Array2<f32> {
    assert_eq!(raw.ncols(), bounds.len());
    let mut out = raw.to_owned();
    for mut row in out.rows_mut() {
        for (v, b) in row.iter_mut().zip(bounds) {
            *v = b.clip(*v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn near_deterministic_limit() {
        let mean = Array2::from_elem((1000, 1), 0.3f64);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, _) = sample_action(mean.view(), &[-5.0], &mut rng);
        // std = exp(-5) ~ 0.0067; the two-sided 99% quantile is ~0.0174.
        let close = a.iter().filter(|v| (*v - 0.3).abs() < 0.02).count();
        assert!(close >= 990);
    }

    #[test]
    fn mode_density() {
        let lp = gaussian_log_prob(array![[0.2, -1.0]].view(), array![[0.2, -1.0]].view(), &[0.0, 0.0]);
        assert!((lp[0] - 2.0 * -0.5 * (2.0 * PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn monte_carlo_moments() {
        let n = 100_000;
        let mean = Array2::from_shape_fn((n, 2), |(_, d)| [0.5, -2.0][d]);
        let log_std = [(-1.0f64), 0.3];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (a, _) = sample_action(mean.view(), &log_std, &mut rng);
        for d in 0..2 {
            let col = a.column(d);
            let m = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
            let sd = log_std[d].exp();
            let target = [0.5, -2.0][d];
            // Mean within 3 standard errors, std within 3 standard errors of the sample std.
            assert!((m - target).abs() < 3.0 * sd / (n as f64).sqrt());
            assert!((var.sqrt() - sd).abs() < 3.0 * sd / (2.0 * n as f64).sqrt());
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let mean = Array2::<f32>::zeros((10, 2));
        let a = sample_action(mean.view(), &[0.0, -1.0], &mut ChaCha8Rng::seed_from_u64(3));
        let b = sample_action(mean.view(), &[0.0, -1.0], &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }

    #[test]
    fn clipping() {
        let b = [ActionBound::new(-0.1, 0.1), ActionBound::new(0.0, 0.5)];
        let out = squash_action(array![[0.05, 0.2], [10.0, -10.0]].view(), &b);
        assert_eq!(out, array![[0.05, 0.2], [0.1, 0.0]]);
    }
}
