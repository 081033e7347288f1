//! Actor-critic MLPs over one flat parameter vector.
//!
//! Both networks are `obs -> hidden -> hidden -> out` with tanh hidden
//! activations and a linear head. The actor head is the Gaussian mean; the
//! log standard deviation is a free vector shared across states. All
//! parameters live in a single `Vec<F>` so the optimizer, checkpoints and
//! finite-difference checks can treat them uniformly.

use std::fmt::{Debug, Display};

use ndarray::linalg::general_mat_mul;
use ndarray::{
    s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis, LinalgScalar, ScalarOperand,
};
use num_traits::{Float, FromPrimitive};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PpoError;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Rows per forward/backward work unit. Fixed so that results do not depend
/// on the number of worker threads.
pub(crate) const ROW_CHUNK: usize = 128;

pub trait Real:
    LinalgScalar
    + Float
    + FromPrimitive
    + ScalarOperand
    + std::ops::AddAssign
    + Send
    + Sync
    + Debug
    + Display
    + Default
    + std::iter::Sum
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Name, shape and offset of one tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy)]
struct Dense {
    w: usize,
    b: usize,
    fan_in: usize,
    fan_out: usize,
}

/// Initial action distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyInit {
    pub log_std: Vec<f64>,
    pub mean_bias: Vec<f64>,
}

impl PolicyInit {
    /// Mean at the centre of each interval, standard deviation half its width.
    pub fn for_bounds(bounds: &[(f64, f64)]) -> Self {
        Self {
            log_std: bounds
                .iter()
                .map(|&(lo, hi)| (0.5 * (hi - lo)).ln().clamp(LOG_STD_MIN, LOG_STD_MAX))
                .collect(),
            mean_bias: bounds.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic<F> {
    obs_dim: usize,
    action_dim: usize,
    hidden: usize,
    specs: Vec<TensorSpec>,
    params: Vec<F>,
}

/// Result of a forward pass over a batch.
#[derive(Debug, Clone)]
pub struct PolicyOutput<F> {
    pub mean: Array2<F>,
    pub log_std: Array1<F>,
    pub value: Array1<F>,
}

/// Activations kept for the backward pass.
pub(crate) struct ForwardCache<F> {
    actor: [Array2<F>; 3],
    critic: [Array2<F>; 3],
}

impl<F> ForwardCache<F> {
    pub(crate) fn mean(&self) -> &Array2<F> {
        &self.actor[2]
    }

    pub(crate) fn value(&self) -> ArrayView1<'_, F> {
        self.critic[2].column(0)
    }
}

const ACTOR: [usize; 3] = [0, 1, 2];
const LOG_STD: usize = 6;
const CRITIC: [usize; 3] = [3, 4, 5];

impl<F: Real> ActorCritic<F> {
    /// All parameters zero: mean 0, log std 0, value 0 everywhere.
    pub fn zeros(obs_dim: usize, action_dim: usize, hidden: usize) -> Self {
        let specs = layout(obs_dim, action_dim, hidden);
        let total = specs.last().map(|s| s.offset + s.len()).unwrap_or(0);
        Self {
            obs_dim,
            action_dim,
            hidden,
            specs,
            params: vec![F::zero(); total],
        }
    }

    /// Orthogonal initialization: gain sqrt(2) on hidden layers, 0.01 on the
    /// actor head, 1 on the critic head, zero biases except the actor head.
    pub fn new(obs_dim: usize, action_dim: usize, hidden: usize, init: &PolicyInit, seed: u64) -> Self {
        assert_eq!(init.log_std.len(), action_dim);
        assert_eq!(init.mean_bias.len(), action_dim);
        let mut net = Self::zeros(obs_dim, action_dim, hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gains = [2f64.sqrt(), 2f64.sqrt(), 0.01, 2f64.sqrt(), 2f64.sqrt(), 1.0];
        for (layer, gain) in gains.into_iter().enumerate() {
            let d = net.dense(layer);
            let w = orthogonal(d.fan_in, d.fan_out, gain, &mut rng);
            for (dst, src) in net.params[d.w..d.w + w.len()].iter_mut().zip(w) {
                *dst = F::of(src);
            }
        }
        let head = net.dense(2);
        for (k, &b) in init.mean_bias.iter().enumerate() {
            net.params[head.b + k] = F::of(b);
        }
        let ls = net.specs[LOG_STD].offset;
        for (k, &v) in init.log_std.iter().enumerate() {
            net.params[ls + k] = F::of(v.clamp(LOG_STD_MIN, LOG_STD_MAX));
        }
        net
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    pub fn log_std(&self) -> &[F] {
        let s = &self.specs[LOG_STD];
        &self.params[s.offset..s.offset + s.len()]
    }

    pub fn clamp_log_std(&mut self) {
        let s = &self.specs[LOG_STD];
        let (lo, hi) = (F::of(LOG_STD_MIN), F::of(LOG_STD_MAX));
        for v in &mut self.params[s.offset..s.offset + s.len()] {
            *v = v.max(lo).min(hi);
        }
    }

    /// Same architecture and values in another float type.
    pub fn cast<G: Real>(&self) -> ActorCritic<G> {
        ActorCritic {
            obs_dim: self.obs_dim,
            action_dim: self.action_dim,
            hidden: self.hidden,
            specs: self.specs.clone(),
            params: self
                .params
                .iter()
                .map(|&v| G::of(v.to_f64().expect("finite")))
                .collect(),
        }
    }

    /// Replaces all parameters; lengths must match.
    pub fn set_params(&mut self, params: Vec<F>) -> Result<(), PpoError> {
        if params.len() != self.params.len() {
            return Err(PpoError::Shape(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params = params;
        Ok(())
    }

    fn dense(&self, layer: usize) -> Dense {
        let tensor = if layer < 3 { 2 * layer } else { 2 * layer + 1 };
        let w = &self.specs[tensor];
        Dense {
            w: w.offset,
            b: self.specs[tensor + 1].offset,
            fan_in: w.shape[0],
            fan_out: w.shape[1],
        }
    }

    fn weight(&self, d: &Dense) -> ArrayView2<'_, F> {
        ArrayView2::from_shape((d.fan_in, d.fan_out), &self.params[d.w..d.w + d.fan_in * d.fan_out]).expect("layout")
    }

    fn bias(&self, d: &Dense) -> ArrayView1<'_, F> {
        ArrayView1::from(&self.params[d.b..d.b + d.fan_out])
    }

    fn mlp(&self, layers: [usize; 3], x: ArrayView2<'_, F>) -> [Array2<F>; 3] {
        let mut acts: [Array2<F>; 3] = Default::default();
        let mut input = x;
        for (k, &layer) in layers.iter().enumerate() {
            let d = self.dense(layer);
            let mut z = input.dot(&self.weight(&d));
            z += &self.bias(&d);
            if k < 2 {
                z.mapv_inplace(Float::tanh);
            }
            acts[k] = z;
            input = acts[k].view();
        }
        acts
    }

    pub(crate) fn forward_cached(&self, obs: ArrayView2<'_, F>) -> ForwardCache<F> {
        ForwardCache {
            actor: self.mlp(ACTOR, obs),
            critic: self.mlp(CRITIC, obs),
        }
    }

    /// Action mean, log std and state value for every row of `obs`.
    pub fn forward(&self, obs: ArrayView2<'_, F>) -> Result<PolicyOutput<F>, PpoError> {
        if obs.ncols() != self.obs_dim {
            return Err(PpoError::Shape(format!(
                "observation width {} does not match network input {}",
                obs.ncols(),
                self.obs_dim
            )));
        }
        if let Some(pos) = obs.iter().position(|v| !v.is_finite()) {
            return Err(PpoError::NonFiniteInput {
                row: pos / self.obs_dim,
            });
        }
        let rows = obs.nrows();
        let mut mean = Array2::zeros((rows, self.action_dim));
        let mut value = Array1::zeros(rows);
        let chunks: Vec<_> = (0..rows.div_ceil(ROW_CHUNK)).collect();
        let parts: Vec<ForwardCache<F>> = chunks
            .par_iter()
            .map(|&c| {
                let lo = c * ROW_CHUNK;
                let hi = (lo + ROW_CHUNK).min(rows);
                self.forward_cached(obs.slice(s![lo..hi, ..]))
            })
            .collect();
        for (c, part) in parts.iter().enumerate() {
            let lo = c * ROW_CHUNK;
            let hi = lo + part.mean().nrows();
            mean.slice_mut(s![lo..hi, ..]).assign(part.mean());
            value.slice_mut(s![lo..hi]).assign(&part.value());
        }
        Ok(PolicyOutput {
            mean,
            log_std: Array1::from(self.log_std().to_vec()),
            value,
        })
    }

    /// Accumulates parameter gradients into `grad` given the loss gradient
    /// with respect to the action means and the values.
    pub(crate) fn backward(
        &self,
        obs: ArrayView2<'_, F>,
        cache: &ForwardCache<F>,
        d_mean: ArrayView2<'_, F>,
        d_value: ArrayView1<'_, F>,
        grad: &mut [F],
    ) {
        self.backward_mlp(ACTOR, obs, &cache.actor, d_mean, grad);
        let d_value = d_value.insert_axis(Axis(1));
        self.backward_mlp(CRITIC, obs, &cache.critic, d_value, grad);
    }

    fn backward_mlp(
        &self,
        layers: [usize; 3],
        x: ArrayView2<'_, F>,
        acts: &[Array2<F>; 3],
        d_out: ArrayView2<'_, F>,
        grad: &mut [F],
    ) {
        let one = F::one();
        let mut delta = d_out.to_owned();
        for k in (0..3).rev() {
            let d = self.dense(layers[k]);
            let input = if k == 0 { x } else { acts[k - 1].view() };
            {
                let mut gw =
                    ArrayViewMut2::from_shape((d.fan_in, d.fan_out), &mut grad[d.w..d.w + d.fan_in * d.fan_out])
                        .expect("layout");
                general_mat_mul(one, &input.t(), &delta, one, &mut gw);
            }
            {
                let mut gb = ArrayViewMut1::from(&mut grad[d.b..d.b + d.fan_out]);
                gb += &delta.sum_axis(Axis(0));
            }
            if k > 0 {
                let mut prev = delta.dot(&self.weight(&d).t());
                prev.zip_mut_with(&acts[k - 1], |g, &h| *g = *g * (one - h * h));
                delta = prev;
            }
        }
    }

    /// Gradient slot of the log-std vector.
    pub(crate) fn log_std_range(&self) -> std::ops::Range<usize> {
        let s = &self.specs[LOG_STD];
        s.offset..s.offset + s.len()
    }
}

fn layout(obs_dim: usize, action_dim: usize, hidden: usize) -> Vec<TensorSpec> {
    let mut specs = Vec::new();
    let mut offset = 0;
    let mut push = |name: String, shape: Vec<usize>| {
        let len: usize = shape.iter().product();
        specs.push(TensorSpec { name, shape, offset });
        offset += len;
    };
    let dims = |out: usize| [(obs_dim, hidden), (hidden, hidden), (hidden, out)];
    for (k, (i, o)) in dims(action_dim).into_iter().enumerate() {
        push(format!("actor.{k}.weight"), vec![i, o]);
        push(format!("actor.{k}.bias"), vec![o]);
    }
    push("actor.log_std".into(), vec![action_dim]);
    for (k, (i, o)) in dims(1).into_iter().enumerate() {
        push(format!("critic.{k}.weight"), vec![i, o]);
        push(format!("critic.{k}.bias"), vec![o]);
    }
    specs
}

/// `rows x cols` matrix with orthonormal rows or columns (whichever are
/// fewer), scaled by `gain`. Row-major.
fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (long, short) = (rows.max(cols), rows.min(cols));
    // `short` vectors of length `long`, Gram-Schmidt orthonormalized.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
    while basis.len() < short {
        let mut v: Vec<f64> = (0..long).map(|_| StandardNormal.sample(rng)).collect();
        for _ in 0..2 {
            for b in &basis {
                let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = gain * if rows >= cols { basis[c][r] } else { basis[r][c] };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_network_outputs_zero() {
        let net = ActorCritic::<f64>::zeros(5, 2, 8);
        let obs = Array2::from_shape_fn((3, 5), |(i, j)| (i * 5 + j) as f64 * 0.1);
        let out = net.forward(obs.view()).unwrap();
        assert!(out.mean.iter().all(|&v| v == 0.0));
        assert!(out.value.iter().all(|&v| v == 0.0));
        assert!(out.log_std.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_evaluated_toy_network() {
        // obs_dim 2, hidden 2, action_dim 1; zero weights, chosen biases.
        let mut net = ActorCritic::<f64>::zeros(2, 1, 2);
        let specs = net.specs().to_vec();
        let find = |n: &str| specs.iter().find(|s| s.name == n).unwrap().clone();
        let p = net.params_mut();
        let b0 = find("actor.0.bias");
        p[b0.offset] = 0.5;
        p[b0.offset + 1] = -0.25;
        let w1 = find("actor.1.weight");
        // Identity on the second layer.
        p[w1.offset] = 1.0;
        p[w1.offset + 3] = 1.0;
        let b1 = find("actor.1.bias");
        p[b1.offset] = 0.1;
        let w2 = find("actor.2.weight");
        p[w2.offset] = 2.0;
        p[w2.offset + 1] = -1.0;
        let b2 = find("actor.2.bias");
        p[b2.offset] = 0.3;
        let out = net.forward(array![[0.0, 0.0]].view()).unwrap();
        let h1 = [0.5f64.tanh(), (-0.25f64).tanh()];
        let h2 = [(h1[0] + 0.1).tanh(), h1[1].tanh()];
        let expect = 2.0 * h2[0] - h2[1] + 0.3;
        assert!((out.mean[[0, 0]] - expect).abs() < 1e-15);
        assert_eq!(out.value[0], 0.0);
    }

    #[test]
    fn identical_rows_identical_outputs() {
        let net = ActorCritic::<f32>::new(6, 2, 16, &PolicyInit::for_bounds(&[(-1.0, 1.0); 2]), 3);
        let row = [0.1f32, 0.9, 0.3, 0.4, 1.0, 0.0];
        let obs = Array2::from_shape_fn((300, 6), |(_, j)| row[j]);
        let out = net.forward(obs.view()).unwrap();
        for i in 1..300 {
            assert_eq!(out.mean.row(i), out.mean.row(0));
            assert_eq!(out.value[i], out.value[0]);
        }
    }

    #[test]
    fn non_finite_input_rejected() {
        let net = ActorCritic::<f32>::zeros(2, 1, 2);
        assert!(matches!(
            net.forward(array![[0.0, 1.0], [f32::NAN, 0.0]].view()),
            Err(PpoError::NonFiniteInput { row: 1 })
        ));
    }

    #[test]
    fn orthogonal_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = orthogonal(10, 4, 1.0, &mut rng);
        for a in 0..4 {
            for b in 0..4 {
                let dot: f64 = (0..10).map(|r| w[r * 4 + a] * w[r * 4 + b]).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_size_parameter_count() {
        let net = ActorCritic::<f32>::zeros(129, 2, 64);
        let actor = 129 * 64 + 64 + 64 * 64 + 64 + 64 * 2 + 2;
        let critic = 129 * 64 + 64 + 64 * 64 + 64 + 64 + 1;
        assert_eq!(net.parameter_count(), actor + 2 + critic);
    }

    #[test]
    fn init_sets_head_bias_and_log_std() {
        let init = PolicyInit::for_bounds(&[(-0.1, 0.1), (0.0, 0.5)]);
        let net = ActorCritic::<f64>::new(4, 2, 8, &init, 1);
        assert!((net.log_std()[0] - 0.1f64.ln()).abs() < 1e-12);
        assert!((net.log_std()[1] - 0.25f64.ln()).abs() < 1e-12);
        let out = net.forward(Array2::zeros((1, 4)).view()).unwrap();
        assert!((out.mean[[0, 1]] - 0.25).abs() < 1e-12);
    }
}
