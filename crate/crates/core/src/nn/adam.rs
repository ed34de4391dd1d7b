//! Adaptive-moment optimizer with global-norm gradient clipping.

use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, MlpNet};
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub clip_norm: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: 1.0,
        }
    }
}

/// Optimizer state for one network: moment estimates and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub(crate) first: Vec<f64>,
    pub(crate) second: Vec<f64>,
    pub(crate) step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    /// Norm of the gradient actually fed into the moment update.
    pub applied_norm: f64,
}

impl Adam {
    pub fn new(net: &MlpNet, config: AdamConfig) -> Result<Self, NnError> {
        if !(config.learning_rate > 0.0 && config.clip_norm > 0.0 && config.epsilon > 0.0) {
            return Err(NnError::InvalidArgument(
                "learning rate, clip norm and epsilon must be positive".into(),
            ));
        }
        if !((0.0..1.0).contains(&config.beta1) && (0.0..1.0).contains(&config.beta2)) {
            return Err(NnError::InvalidArgument("betas must lie in [0, 1)".into()));
        }
        let n = net.num_params();
        Ok(Self {
            config,
            first: vec![0.0; n],
            second: vec![0.0; n],
            step: 0,
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Descends along `grads` (the gradient of a loss to minimize). The global
    /// norm is clipped to `clip_norm` before the moments are updated. Non-finite
    /// gradients are refused and leave both the network and the state untouched.
    pub fn step(&mut self, net: &mut MlpNet, grads: &Gradients) -> Result<StepReport, NnError> {
        if !grads.is_congruent(net) || self.first.len() != net.num_params() {
            return Err(NnError::InvalidShape(
                "gradients do not match the network".into(),
            ));
        }
        if !grads.is_finite() {
            return Err(NnError::NonFinite("gradient"));
        }
        let norm = grads.global_norm();
        let factor = if norm > self.config.clip_norm {
            self.config.clip_norm / norm
        } else {
            1.0
        };
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            ..
        } = self.config;
        let t = (self.step + 1) as f64;
        let bias1 = 1.0 - beta1.powf(t);
        let bias2 = 1.0 - beta2.powf(t);
        let step_size = learning_rate / bias1;

        let mut updated = net.clone();
        for (((p, g), m), v) in updated
            .params_mut()
            .zip(grads.iter())
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            let g = g * factor;
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= step_size * *m / ((*v / bias2).sqrt() + epsilon);
        }
        if !updated.is_finite() {
            return Err(NnError::NonFinite("parameters after update"));
        }
        *net = updated;
        self.step += 1;
        Ok(StepReport {
            grad_norm: norm,
            applied_norm: norm * factor,
        })
    }
}
