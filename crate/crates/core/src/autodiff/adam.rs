use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::DiffTensor;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        Self { learning_rate, weight_decay, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adam with decoupled weight decay (AdamW).
///
/// Moment buffers are created lazily on the first step and keyed by position,
/// so the same parameter slice must be passed on every call.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    first_moment: Vec<Matrix>,
    second_moment: Vec<Matrix>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, step: 0, first_moment: Vec::new(), second_moment: Vec::new() }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Number of updates taken so far.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update of every parameter from its accumulated gradient.
    /// An empty parameter list is a no-op.
    pub fn step(&mut self, params: &mut [DiffTensor]) {
        if params.is_empty() {
            return;
        }
        if self.first_moment.is_empty() {
            self.first_moment = params.iter().map(|p| Matrix::zeros(p.shape().0, p.shape().1)).collect();
            self.second_moment = self.first_moment.clone();
        }
        assert_eq!(self.first_moment.len(), params.len(), "parameter list changed between Adam steps");
        self.step += 1;
        let AdamConfig { learning_rate: lr, weight_decay: wd, beta1, beta2, epsilon } = self.config;
        let t = self.step as f64;
        let bc1 = 1.0 - libm::pow(beta1, t);
        let bc2 = 1.0 - libm::pow(beta2, t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.first_moment).zip(&mut self.second_moment) {
            assert_eq!(m.shape(), p.shape(), "moment shape does not match its parameter");
            let (value, grad) = p.parts_mut();
            let it = value.as_mut_slice().iter_mut().zip(grad.as_slice());
            for ((w, &g), (m, v)) in it.zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice())) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= lr * (m_hat / (libm::sqrt(v_hat) + epsilon) + wd * *w);
            }
        }
    }
}
