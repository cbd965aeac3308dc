//! Adam and the max-norm weight constraint.

use super::params::ParamStore;
use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(alpha: f64, beta1: f64, beta2: f64) -> Result<Self> {
        let cfg = Self {
            alpha,
            beta1,
            beta2,
            epsilon: 1e-8,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config(format!(
                "Adam needs alpha > 0 and betas in [0, 1): {self:?}"
            )));
        }
        Ok(())
    }
}

/// One bias-corrected Adam update of `params` in place. `t` starts at 1.
pub fn adam_step<T: Scalar>(params: &mut [T], grads: &[T], m: &mut [T], v: &mut [T], cfg: &AdamConfig, t: u64) {
    let b1 = T::from_f64_lossy(cfg.beta1);
    let b2 = T::from_f64_lossy(cfg.beta2);
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    // alpha_t = alpha·√(1−β2ᵗ)/(1−β1ᵗ), ε scaled to match the textbook form.
    let step = T::from_f64_lossy(cfg.alpha * c2.sqrt() / c1);
    let eps = T::from_f64_lossy(cfg.epsilon * c2.sqrt());
    for (((w, &g), mi), vi) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *mi = b1 * *mi + (T::one() - b1) * g;
        *vi = b2 * *vi + (T::one() - b2) * g * g;
        *w = *w - step * *mi / (vi.sqrt() + eps);
    }
}

/// Adam state for every tensor of one parameter store.
#[derive(Debug, Clone)]
pub struct Adam<T: Scalar> {
    cfg: AdamConfig,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(cfg: AdamConfig, store: &ParamStore<T>) -> Self {
        let zeros = |s: &ParamStore<T>| s.iter().map(|p| vec![T::zero(); p.value.len()]).collect();
        Self {
            cfg,
            m: zeros(store),
            v: zeros(store),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    /// Apply the accumulated gradients, then clear them.
    pub fn step(&mut self, store: &mut ParamStore<T>) {
        self.t += 1;
        for (i, id) in store.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let grad = store.grad(id).data().to_vec();
            adam_step(store.value_mut(id).data_mut(), &grad, &mut self.m[i], &mut self.v[i], &self.cfg, self.t);
        }
        store.zero_grad();
    }
}

/// Rescale every column of a `[fan_in, units]` weight matrix whose
/// Euclidean norm exceeds `c` back onto the radius-`c` ball.
pub fn maxnorm_project<T: Scalar>(weights: &mut Tensor<T>, c: f64) -> Result<()> {
    if !(c > 0.0) {
        return Err(Error::Parameter(format!("max-norm bound must be positive, got {c}")));
    }
    if c.is_infinite() {
        return Ok(());
    }
    let shape = weights.shape().to_vec();
    let cols = *shape.last().ok_or_else(|| Error::Dimension("max-norm on rank-0 tensor".into()))?;
    let rows = weights.len() / cols.max(1);
    let data = weights.data_mut();
    for j in 0..cols {
        let norm = (0..rows)
            .map(|i| data[i * cols + j].to_f64().unwrap_or(0.0).powi(2))
            .sum::<f64>()
            .sqrt();
        if norm > c {
            let s = T::from_f64_lossy(c / norm);
            for i in 0..rows {
                data[i * cols + j] = data[i * cols + j] * s;
            }
        }
    }
    Ok(())
}
