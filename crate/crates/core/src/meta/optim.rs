use crate::error::{Error, Result};
use crate::nn::ParameterSet;
use crate::real::Real;

/// Plain SGD: `w − lr·grads`.
pub fn sgd_step<T: Real>(w: &ParameterSet<T>, grads: &[T], lr: f64) -> Result<ParameterSet<T>> {
    if grads.len() != w.len() {
        return Err(Error::LayoutMismatch);
    }
    let lr = T::of(lr);
    let values = w.flat().iter().zip(grads).map(|(&p, &g)| p - lr * g).collect();
    ParameterSet::from_flat(w.layout().clone(), values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-5, beta1: 0.5, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && [self.lr, self.beta1, self.beta2, self.eps].iter().all(|v| v.is_finite());
        if !ok {
            return Err(Error::InvalidConfig(format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }
}

/// First and second moments plus the timestep of one Adam optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn zeros(len: usize) -> Self {
        AdamState { m: vec![T::zero(); len], v: vec![T::zero(); len], t: 0 }
    }
}

/// One bias-corrected Adam step on `params` along `grad`; arithmetic runs in
/// f64 and the moments are stored back in `T`.
pub fn adam_step<T: Real>(
    cfg: &AdamConfig,
    state: &mut AdamState<T>,
    params: &mut ParameterSet<T>,
    grad: &[T],
) -> Result<()> {
    let n = params.len();
    if grad.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::LayoutMismatch);
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (((p, m), v), &g) in params.flat_mut().iter_mut().zip(&mut state.m).zip(&mut state.v).zip(grad) {
        let g = g.as_f64();
        let m1 = cfg.beta1 * m.as_f64() + (1.0 - cfg.beta1) * g;
        let v1 = cfg.beta2 * v.as_f64() + (1.0 - cfg.beta2) * g * g;
        *m = T::of(m1);
        *v = T::of(v1);
        let update = cfg.lr * (m1 / bc1) / ((v1 / bc2).sqrt() + cfg.eps);
        *p = T::of(p.as_f64() - update);
    }
    Ok(())
}
