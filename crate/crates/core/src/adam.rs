//! Adam optimizer with bias correction, one state per parameter tensor.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Real;

/// First/second moment estimates plus hyperparameters for one parameter.
#[derive(Debug, Clone)]
pub struct AdamState<T: Real> {
    m: Vec<T>,
    v: Vec<T>,
    step: u64,
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Real> AdamState<T> {
    pub fn new(len: usize, lr: T, beta1: T, beta2: T, eps: T) -> Self {
        AdamState {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            step: 0,
            lr,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update:
///   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2,
///   param -= lr * m_hat / (sqrt(v_hat) + eps)
/// with m_hat, v_hat the bias-corrected moments. `name` labels the
/// parameter in the non-finite-gradient diagnostic.
pub fn adam_step<T: Real>(
    name: &str,
    param: &mut [T],
    grad: &[T],
    state: &mut AdamState<T>,
) -> Result<()> {
    assert_eq!(param.len(), grad.len(), "adam_step: param/grad length");
    assert_eq!(param.len(), state.m.len(), "adam_step: param/state length");
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient {
            param: name.to_string(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let one = T::one();
    let m_corr = one - state.beta1.powi(t);
    let v_corr = one - state.beta2.powi(t);
    for i in 0..param.len() {
        let g = grad[i];
        state.m[i] = state.beta1 * state.m[i] + (one - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (one - state.beta2) * g * g;
        let m_hat = state.m[i] / m_corr;
        let v_hat = state.v[i] / v_corr;
        param[i] = param[i] - state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}
