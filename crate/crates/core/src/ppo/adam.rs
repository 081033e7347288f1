use super::{PpoError, Real};

/// Adam with bias correction. Moments are kept in the parameter type.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<F> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub(crate) step: u64,
    pub(crate) m: Vec<F>,
    pub(crate) v: Vec<F>,
}

impl<F: Real> Adam<F> {
    pub fn new(len: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            m: vec![F::zero(); len],
            v: vec![F::zero(); len],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[F], &[F]) {
        (&self.m, &self.v)
    }

    pub(crate) fn restore(&mut self, step: u64, m: Vec<F>, v: Vec<F>) -> Result<(), PpoError> {
        if m.len() != self.m.len() || v.len() != self.v.len() {
            return Err(PpoError::Checkpoint(format!(
                "optimizer moments have {} / {} entries, expected {}",
                m.len(),
                v.len(),
                self.m.len()
            )));
        }
        self.step = step;
        self.m = m;
        self.v = v;
        Ok(())
    }

    pub fn update(&mut self, params: &mut [F], grads: &[F]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (F::of(self.beta1), F::of(self.beta2));
        let (c1, c2) = (F::one() - b1, F::one() - b2);
        let bc1 = F::of(1.0 - self.beta1.powi(t));
        let bc2 = F::of(1.0 - self.beta2.powi(t));
        let (lr, eps) = (F::of(self.lr), F::of(self.eps));
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = b1 * *m + c1 * g;
            *v = b2 * *v + c2 * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
