use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use super::ParamStore;
use crate::error::{Error, Result};

fn check_finite(store: &ParamStore, range: &Range<usize>) -> Result<()> {
    match store.grads()[range.clone()].iter().position(|g| !g.is_finite()) {
        Some(k) => Err(Error::NonFiniteGradient {
            param: store.name_of(range.start + k),
        }),
        None => Ok(()),
    }
}

/// Plain gradient descent over a parameter range.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
    pub range: Range<usize>,
}

impl Sgd {
    pub fn new(range: Range<usize>, lr: f64) -> Self {
        Sgd { lr, range }
    }

    pub fn step(&self, store: &mut ParamStore) -> Result<()> {
        check_finite(store, &self.range)?;
        for i in self.range.clone() {
            let g = store.grads()[i];
            store.params_mut()[i] -= self.lr * g;
        }
        Ok(())
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub range: Range<usize>,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(range: Range<usize>, lr: f64) -> Self {
        let n = range.len();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            range,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Descends along the stored gradient.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        check_finite(store, &self.range)?;
        self.t += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        let start = self.range.start;
        for k in 0..self.m.len() {
            let g = store.grads()[start + k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[k] / bc1;
            let v_hat = self.v[k] / bc2;
            store.params_mut()[start + k] -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
        }
        Ok(())
    }
}

/// Rescales the gradients in `range` so their Euclidean norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_grad_norm(store: &mut ParamStore, range: Range<usize>, max_norm: f64) -> f64 {
    let g = &mut store.grads_mut()[range];
    let norm = libm::sqrt(g.iter().map(|x| x * x).sum::<f64>());
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        g.iter_mut().for_each(|x| *x *= s);
    }
    norm
}
