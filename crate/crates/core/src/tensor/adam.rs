use serde::{Deserialize, Serialize};

use super::{Tensor, TensorError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Multiplicative learning-rate decay applied every `decay_every` steps.
    pub decay: f64,
    /// Step schedule period; `None` keeps the base rate throughout.
    pub decay_every: Option<u64>,
    /// L2 penalty folded into the gradient; 0 disables it.
    pub weight_decay: f64,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_grad_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
            decay: 0.1,
            decay_every: None,
            weight_decay: 0.0,
            clip_grad_norm: None,
        }
    }
}

/// First/second moment buffers plus the update counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    config: AdamConfig,
    state: AdamState,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
        Self {
            config,
            state: AdamState {
                m: zeros.clone(),
                v: zeros,
                step: 0,
            },
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn state(&self) -> &AdamState {
        &self.state
    }

    /// Learning rate the next call to [`Adam::step`] will use.
    pub fn learning_rate(&self) -> f64 {
        match self.config.decay_every {
            Some(period) if period > 0 => {
                let drops = (self.state.step / period) as i32;
                self.config.learning_rate * self.config.decay.powi(drops)
            }
            _ => self.config.learning_rate,
        }
    }

    /// One bias-corrected Adam update over every tracked parameter, then
    /// clears the gradients. Untracked tensors are left alone.
    pub fn step(&mut self, params: &mut [Tensor]) -> Result<(), TensorError> {
        if params.len() != self.state.m.len() {
            return Err(TensorError::StateMismatch {
                state: self.state.m.len(),
                params: params.len(),
            });
        }
        for (i, p) in params.iter().enumerate() {
            if p.len() != self.state.m[i].len() {
                return Err(TensorError::StateMismatch {
                    state: self.state.m[i].len(),
                    params: p.len(),
                });
            }
            if p.is_tracked() && p.grad().is_none() {
                return Err(TensorError::MissingGradient(i));
            }
        }

        let lr = self.learning_rate();
        let cfg = &self.config;
        let clip_scale = match cfg.clip_grad_norm {
            Some(max_norm) => {
                let norm = params
                    .iter()
                    .filter_map(Tensor::grad)
                    .flatten()
                    .map(|g| g * g)
                    .sum::<f64>()
                    .sqrt();
                if norm > max_norm {
                    max_norm / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };

        self.state.step += 1;
        let t = self.state.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);

        for (i, p) in params.iter_mut().enumerate() {
            if !p.is_tracked() {
                continue;
            }
            let grad = p.grad().expect("checked above").to_vec();
            let (m, v) = (&mut self.state.m[i], &mut self.state.v[i]);
            for (j, value) in p.values_mut().iter_mut().enumerate() {
                let g = grad[j] * clip_scale + cfg.weight_decay * *value;
                m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
                v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                *value -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
            p.clear_grad();
        }
        Ok(())
    }
}
