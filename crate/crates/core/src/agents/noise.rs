//! Adaptive parameter-space exploration noise.

use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::nn::{Matrix, MlpNet};

/// Perturbation scale with its multiplicative adaptation rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseState {
    pub sigma: f64,
    /// Growth/shrink factor per adaptation.
    pub alpha: f64,
    /// Target policy distance.
    pub threshold: f64,
}

impl Default for NoiseState {
    fn default() -> Self {
        Self {
            sigma: 0.2,
            alpha: 1.01,
            threshold: 0.2,
        }
    }
}

impl NoiseState {
    /// Grows σ by `alpha` when the measured distance is at most the
    /// threshold, shrinks it otherwise.
    pub fn adapt(self, distance: f64) -> Self {
        let sigma = if distance <= self.threshold {
            self.sigma * self.alpha
        } else {
            self.sigma / self.alpha
        };
        Self { sigma, ..self }
    }
}

/// Root-mean-square difference between the head outputs of two actors over
/// a batch of states (averaged over rows and action dimensions).
pub fn policy_distance(
    actor: &MlpNet,
    perturbed: &MlpNet,
    states: &Matrix,
) -> Result<f64, AgentError> {
    if states.rows() == 0 {
        return Err(AgentError::Config(
            "policy distance needs at least one state".into(),
        ));
    }
    let a = actor.forward_batch(states)?;
    let b = perturbed.forward_batch(states)?;
    if a.cols() != b.cols() {
        return Err(AgentError::Config(
            "actors have different action sizes".into(),
        ));
    }
    let sq: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok((sq / a.as_slice().len() as f64).sqrt())
}
