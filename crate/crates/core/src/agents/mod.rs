//! Learners: flat DDPG and D4PG baselines and the two-level HDDPG agent.

mod checkpoint;
mod d4pg;
mod ddpg;
mod flat;
mod hddpg;
mod noise;
mod subgoal;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maze::{MazeEnv, TraceRow};
use crate::nn::{AdamConfig, NnError};
use crate::replay::ReplayError;

pub use checkpoint::{CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use d4pg::D4pgCore;
pub use ddpg::{bellman_targets, Batch, CoreParams, DdpgCore, NetShape, UpdateStats};
pub use flat::{FlatAgent, FlatCore};
pub use hddpg::{high_state, HddpgAgent};
pub use noise::{policy_distance, NoiseState};
pub use subgoal::{
    best_candidate, candidate_scores, candidate_scores_limited, offpolicy_correct, place_subgoal,
    relabel_candidates, scored_steps, select_low_action, select_subgoal, SubgoalGeometry,
    NUM_CANDIDATES,
};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("non-finite {what}: {detail}")]
    NonFinite { what: &'static str, detail: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
}

/// Hyperparameters shared by all three learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub tau: f64,
    /// Critic step size.
    pub learning_rate: f64,
    pub actor_learning_rate: f64,
    /// Actor loss weight on squared head pre-activations; keeps bounded
    /// heads out of saturation.
    pub head_penalty: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub sigma0: f64,
    pub noise_alpha: f64,
    pub noise_threshold: f64,
    /// Weight of the summed low-level reward in the high-level reward.
    pub kappa: f64,
    pub subgoal_radius: f64,
    /// Subgoals are never placed closer than this to the robot (m).
    pub subgoal_min_distance: f64,
    /// Clearance between a subgoal and the walls (m).
    pub subgoal_margin: f64,
    /// Cut subgoals back to the robot's line of sight.
    pub subgoal_line_of_sight: bool,
    pub subgoal_step_limit: usize,
    /// Per-axis std of the Gaussian relabeling candidates (m).
    pub candidate_std: f64,
    /// Relabeling scores at most this many evenly spaced steps of a
    /// segment; 0 scores all of them.
    pub relabel_steps: usize,
    /// Multiplier applied to rewards before they reach a critic.
    pub reward_scale: f64,
    /// High-level networks update on every n-th environment step.
    pub high_update_every: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            gamma: 0.99,
            tau: 0.005,
            learning_rate: 1e-3,
            actor_learning_rate: 1e-4,
            head_penalty: 1e-3,
            clip_norm: 1.0,
            batch_size: 256,
            buffer_capacity: 200_000,
            sigma0: 0.2,
            noise_alpha: 1.01,
            noise_threshold: 0.2,
            kappa: 0.4,
            subgoal_radius: 1.0,
            subgoal_min_distance: 0.4,
            subgoal_margin: 0.25,
            subgoal_line_of_sight: true,
            subgoal_step_limit: 100,
            candidate_std: 0.5,
            relabel_steps: 0,
            reward_scale: 0.01,
            high_update_every: 1,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let positive = [
            ("gamma", self.gamma),
            ("tau", self.tau),
            ("learning_rate", self.learning_rate),
            ("actor_learning_rate", self.actor_learning_rate),
            ("clip_norm", self.clip_norm),
            ("sigma0", self.sigma0),
            ("noise_alpha", self.noise_alpha),
            ("noise_threshold", self.noise_threshold),
            ("kappa", self.kappa),
            ("subgoal_radius", self.subgoal_radius),
            ("subgoal_margin", self.subgoal_margin),
            ("candidate_std", self.candidate_std),
            ("reward_scale", self.reward_scale),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(AgentError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.head_penalty.is_finite() && self.head_penalty >= 0.0) {
            return Err(AgentError::Config(format!(
                "head_penalty must be non-negative, got {}",
                self.head_penalty
            )));
        }
        if self.gamma > 1.0 || self.tau > 1.0 {
            return Err(AgentError::Config("gamma and tau must not exceed 1".into()));
        }
        let counts = [
            ("batch_size", self.batch_size),
            ("buffer_capacity", self.buffer_capacity),
            ("subgoal_step_limit", self.subgoal_step_limit),
            ("high_update_every", self.high_update_every),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(AgentError::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..self.subgoal_radius).contains(&self.subgoal_min_distance) {
            return Err(AgentError::Config(format!(
                "subgoal_min_distance must lie in [0, subgoal_radius), got {}",
                self.subgoal_min_distance
            )));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(AgentError::Config(
                "hidden widths must be non-empty and positive".into(),
            ));
        }
        Ok(())
    }

    pub fn core_params(&self) -> CoreParams {
        CoreParams {
            gamma: self.gamma,
            tau: self.tau,
            actor_optimizer: AdamConfig {
                learning_rate: self.actor_learning_rate,
                clip_norm: self.clip_norm,
                ..AdamConfig::default()
            },
            critic_optimizer: AdamConfig {
                learning_rate: self.learning_rate,
                clip_norm: self.clip_norm,
                ..AdamConfig::default()
            },
            head_penalty: self.head_penalty,
        }
    }

    pub fn subgoal_geometry(&self) -> SubgoalGeometry {
        SubgoalGeometry {
            radius: self.subgoal_radius,
            min_distance: self.subgoal_min_distance,
            margin: self.subgoal_margin,
            line_of_sight: self.subgoal_line_of_sight,
        }
    }

    pub fn initial_noise(&self) -> NoiseState {
        NoiseState {
            sigma: self.sigma0,
            alpha: self.noise_alpha,
            threshold: self.noise_threshold,
        }
    }
}

/// Exploration and learning on, or the greedy unperturbed policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Greedy,
}

/// What one episode produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeOutcome {
    /// Goal reached without collision within the step budget.
    pub success: bool,
    pub collision: bool,
    pub steps: usize,
    /// Sum of per-step flat rewards.
    pub score: f64,
    /// Sum of per-step low-level rewards (equals `score` for flat agents).
    pub low_reward_sum: f64,
    /// Noise scales after end-of-episode adaptation: `[low/flat, high]`.
    pub sigma: [f64; 2],
    pub subgoals: usize,
    /// Per-step rows, filled when tracing was requested.
    pub trace: Vec<TraceRow>,
}

/// Any of the three learners behind one interface.
#[derive(Debug, Clone)]
pub enum Agent {
    Flat(FlatAgent),
    Hierarchical(HddpgAgent),
}

impl Agent {
    pub fn run_episode<R: Rng + ?Sized>(
        &mut self,
        env: &mut MazeEnv,
        max_steps: usize,
        mode: Mode,
        trace: bool,
        rng: &mut R,
    ) -> Result<EpisodeOutcome, AgentError> {
        match self {
            Agent::Flat(a) => a.run_episode(env, max_steps, mode, trace, rng),
            Agent::Hierarchical(a) => a.run_episode(env, max_steps, mode, trace, rng),
        }
    }

    pub fn save(&self, dir: &std::path::Path) -> Result<(), AgentError> {
        match self {
            Agent::Flat(a) => checkpoint::save_flat(a, dir),
            Agent::Hierarchical(a) => checkpoint::save_hddpg(a, dir),
        }
    }

    pub fn load(dir: &std::path::Path) -> Result<Agent, AgentError> {
        checkpoint::load(dir)
    }
}

fn trace_start(env: &MazeEnv) -> TraceRow {
    let s = env.state();
    TraceRow {
        step: 0,
        x: s.position.x,
        y: s.position.y,
        heading: s.heading,
        v: 0.0,
        omega: 0.0,
        reward_low: 0.0,
        reward_flat: 0.0,
        event: crate::maze::TraceEvent::None,
    }
}

fn trace_row(env: &MazeEnv, step: usize, out: &crate::maze::StepOutcome) -> TraceRow {
    let s = env.state();
    TraceRow {
        step,
        x: s.position.x,
        y: s.position.y,
        heading: s.heading,
        v: out.applied.linear,
        omega: out.applied.angular,
        reward_low: out.low_reward,
        reward_flat: out.flat_reward,
        event: crate::maze::TraceEvent::from_flags(
            out.collision,
            out.subgoal_reached,
            out.goal_reached,
        ),
    }
}
