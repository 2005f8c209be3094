use serde::{Deserialize, Serialize};

use crate::error::{DysError, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Default::default()
        }
    }
}

/// Adam moments for a fixed, ordered collection of parameter slices.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(num_params: usize, config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            m: vec![T::zero(); num_params],
            v: vec![T::zero(); num_params],
        }
    }

    pub fn num_params(&self) -> usize {
        self.m.len()
    }

    /// One bias-corrected Adam update. `params` and `grads` are visited in
    /// order and must together have exactly `num_params` entries.
    pub fn update(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) -> Result<()> {
        let n_params: usize = params.iter().map(|p| p.len()).sum();
        let n_grads: usize = grads.iter().map(|g| g.len()).sum();
        if n_params != self.m.len() {
            return Err(DysError::shape("adam parameters", self.m.len(), n_params));
        }
        if n_grads != n_params || params.len() != grads.len() {
            return Err(DysError::shape("adam gradients", n_params, n_grads));
        }
        for (s, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(DysError::shape("adam gradient slice", p.len(), g.len()));
            }
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(DysError::NonFinite {
                    what: "gradient",
                    detail: format!("slice {s}, index {i}: {}", g[i]),
                });
            }
        }

        self.step += 1;
        let c = &self.config;
        let b1 = T::of(c.beta1);
        let b2 = T::of(c.beta2);
        let lr = T::of(c.learning_rate);
        let eps = T::of(c.epsilon);
        let t = self.step as i32;
        let bc1 = T::one() - T::of(c.beta1.powi(t));
        let bc2 = T::one() - T::of(c.beta2.powi(t));

        let mut k = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            for (theta, &grad) in p.iter_mut().zip(g.iter()) {
                let m = b1 * self.m[k] + (T::one() - b1) * grad;
                let v = b2 * self.v[k] + (T::one() - b2) * grad * grad;
                self.m[k] = m;
                self.v[k] = v;
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
                k += 1;
            }
        }
        Ok(())
    }
}
