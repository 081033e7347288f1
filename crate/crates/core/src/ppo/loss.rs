use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use super::dist::{entropy, gaussian_log_prob};
use super::network::ROW_CHUNK;
use super::{ActorCritic, PpoError, Real};

/// One minibatch of flattened samples.
#[derive(Debug, Clone, Copy)]
pub struct Minibatch<'a, F> {
    pub obs: ArrayView2<'a, F>,
    /// Unclipped sampled actions.
    pub actions: ArrayView2<'a, F>,
    pub old_log_probs: ArrayView1<'a, F>,
    pub advantages: ArrayView1<'a, F>,
    pub returns: ArrayView1<'a, F>,
}

impl<F> Minibatch<'_, F> {
    pub fn len(&self) -> usize {
        self.obs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefs {
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    pub loss: f64,
    /// `-mean(min(rho A, clip(rho) A))`.
    pub policy_loss: f64,
    /// `mean((V - R)^2)`, before the coefficient.
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

struct Partial<F> {
    grad: Vec<F>,
    surrogate: f64,
    sq_error: f64,
    clipped: usize,
}

/// Clipped-surrogate PPO loss and its exact gradient with respect to every
/// network parameter.
///
/// The batch is split into fixed-size row chunks evaluated in parallel and
/// reduced in chunk order, so the result does not depend on thread count.
pub fn ppo_loss<F: Real>(
    net: &ActorCritic<F>,
    mb: &Minibatch<'_, F>,
    coefs: &LossCoefs,
) -> Result<(LossStats, Vec<F>), PpoError> {
    let b = mb.len();
    let a_dim = net.action_dim();
    if b == 0
        || mb.obs.ncols() != net.obs_dim()
        || mb.actions.dim() != (b, a_dim)
        || mb.old_log_probs.len() != b
        || mb.advantages.len() != b
        || mb.returns.len() != b
    {
        return Err(PpoError::Shape(format!(
            "inconsistent minibatch: obs {:?}, actions {:?}, {} / {} / {} scalars",
            mb.obs.dim(),
            mb.actions.dim(),
            mb.old_log_probs.len(),
            mb.advantages.len(),
            mb.returns.len()
        )));
    }
    let chunks: Vec<usize> = (0..b.div_ceil(ROW_CHUNK)).collect();
    let partials: Vec<Partial<F>> = chunks
        .par_iter()
        .map(|&c| {
            let lo = c * ROW_CHUNK;
            chunk_loss(net, mb, lo, (lo + ROW_CHUNK).min(b), b, coefs)
        })
        .collect();

    let mut grad = vec![F::zero(); net.parameter_count()];
    let (mut surrogate, mut sq_error, mut clipped) = (0.0, 0.0, 0);
    for p in &partials {
        grad.iter_mut().zip(&p.grad).for_each(|(g, v)| *g += *v);
        surrogate += p.surrogate;
        sq_error += p.sq_error;
        clipped += p.clipped;
    }
    let ent_coef = F::of(coefs.entropy_coef);
    for k in net.log_std_range() {
        grad[k] = grad[k] - ent_coef;
    }

    let bf = b as f64;
    let ent = entropy(net.log_std()).to_f64().unwrap_or(f64::NAN);
    let policy_loss = -surrogate / bf;
    let value_loss = sq_error / bf;
    let loss = policy_loss + coefs.value_coef * value_loss - coefs.entropy_coef * ent;
    let stats = LossStats {
        loss,
        policy_loss,
        value_loss,
        entropy: ent,
        clip_fraction: clipped as f64 / bf,
    };
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        let log_std: Vec<f64> = net.log_std().iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
        return Err(PpoError::NonFinite {
            diagnostics: format!(
                "loss {loss}, policy {policy_loss}, value {value_loss}, log_std {log_std:?}, clip fraction {}",
                stats.clip_fraction
            ),
        });
    }
    Ok((stats, grad))
}

fn chunk_loss<F: Real>(
    net: &ActorCritic<F>,
    mb: &Minibatch<'_, F>,
    lo: usize,
    hi: usize,
    total: usize,
    coefs: &LossCoefs,
) -> Partial<F> {
    let obs = mb.obs.slice(s![lo..hi, ..]);
    let actions = mb.actions.slice(s![lo..hi, ..]);
    let cache = net.forward_cached(obs);
    let mean = cache.mean();
    let value = cache.value();
    let log_std = net.log_std();
    let a_dim = log_std.len();
    let inv_var: Vec<F> = log_std.iter().map(|l| (-(*l + *l)).exp()).collect();
    let lp = gaussian_log_prob(actions, mean.view(), log_std);

    let inv_b = F::one() / F::of(total as f64);
    let (lo_clip, hi_clip) = (F::of(1.0 - coefs.clip), F::of(1.0 + coefs.clip));
    let two_c = F::of(2.0 * coefs.value_coef);
    let rows = hi - lo;
    let mut d_mean = Array2::zeros((rows, a_dim));
    let mut d_value = Array1::zeros(rows);
    let mut d_log_std = vec![F::zero(); a_dim];
    let (mut surrogate, mut sq_error, mut clipped) = (0.0, 0.0, 0);
    for r in 0..rows {
        let adv = mb.advantages[lo + r];
        let ratio = (lp[r] - mb.old_log_probs[lo + r]).exp();
        let unclipped = ratio * adv;
        let clipped_term = ratio.max(lo_clip).min(hi_clip) * adv;
        if ratio < lo_clip || ratio > hi_clip {
            clipped += 1;
        }
        // d(-min(...)/B)/d log_prob; zero when the clipped branch is selected.
        let d_lp = if unclipped <= clipped_term {
            surrogate += unclipped.to_f64().unwrap_or(f64::NAN);
            -unclipped * inv_b
        } else {
            surrogate += clipped_term.to_f64().unwrap_or(f64::NAN);
            F::zero()
        };
        for d in 0..a_dim {
            let diff = actions[[r, d]] - mean[[r, d]];
            d_mean[[r, d]] = d_lp * diff * inv_var[d];
            d_log_std[d] += d_lp * (diff * diff * inv_var[d] - F::one());
        }
        let err = value[r] - mb.returns[lo + r];
        sq_error += (err * err).to_f64().unwrap_or(f64::NAN);
        d_value[r] = two_c * err * inv_b;
    }

    let mut grad = vec![F::zero(); net.parameter_count()];
    net.backward(obs, &cache, d_mean.view(), d_value.view(), &mut grad);
    for (k, g) in net.log_std_range().zip(d_log_std) {
        grad[k] += g;
    }
    Partial {
        grad,
        surrogate,
        sq_error,
        clipped,
    }
}

/// In-place `(a - mean) / (std + 1e-8)` with the population std.
pub fn normalize_advantages<F: Real>(adv: &mut [F]) {
    if adv.is_empty() {
        return;
    }
    let n = F::of(adv.len() as f64);
    let mean = adv.iter().fold(F::zero(), |s, &a| s + a) / n;
    let var = adv.iter().fold(F::zero(), |s, &a| s + (a - mean) * (a - mean)) / n;
    let denom = var.sqrt() + F::of(1e-8);
    for a in adv.iter_mut() {
        *a = (*a - mean) / denom;
    }
}
