//! Adam with bias correction, plus global-norm gradient clipping.

use serde::{Deserialize, Serialize};

/// Adam over a flat parameter slice.
///
/// First/second-moment buffers are owned here and must match the parameter
/// length for the optimizer's whole life.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, epsilon: f64, n_params: usize) -> Adam {
        assert!(lr > 0.0, "learning rate must be positive");
        Adam {
            lr,
            beta1,
            beta2,
            epsilon,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    /// The standard configuration (β1 0.9, β2 0.999, ε 1e-8).
    pub fn with_defaults(lr: f64, n_params: usize) -> Adam {
        Adam::new(lr, 0.9, 0.999, 1e-8, n_params)
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update: `params -= lr * m_hat / (sqrt(v_hat) + ε)`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for k in 0..params.len() {
            let g = grads[k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[k] / bc1;
            let v_hat = self.v[k] / bc2;
            params[k] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Scale `grads` so its global L2 norm is at most `max_norm`.
///
/// Returns the pre-clip norm. A non-positive `max_norm` disables clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
    norm
}
