//! Double-actor, double-critic learner.
//!
//! Bootstrap values take the minimum of the two target critics. The target
//! action for each next state comes from whichever target actor scores higher
//! under target critic 1. Both critics regress to the shared target, both
//! actors ascend critic 1, and at decision time the actor whose proposal
//! critic 1 prefers is used.

use rand::Rng;

use super::ddpg::{
    actor_step, bellman_targets, critic_step, Batch, CoreParams, NetShape, UpdateStats,
};
use super::AgentError;
use crate::nn::{Adam, Matrix, MlpNet};

#[derive(Debug, Clone)]
pub struct D4pgCore {
    pub actors: [MlpNet; 2],
    pub critics: [MlpNet; 2],
    pub target_actors: [MlpNet; 2],
    pub target_critics: [MlpNet; 2],
    pub actor_opts: [Adam; 2],
    pub critic_opts: [Adam; 2],
    pub params: CoreParams,
}

/// Row-wise choice between two action proposals by a critic's score.
/// Ties go to the first proposal.
pub(crate) fn pick_by_critic(
    critic: &MlpNet,
    states: &Matrix,
    first: &Matrix,
    second: &Matrix,
) -> Result<Matrix, AgentError> {
    let q1 = critic.forward_batch(&states.hstack(first))?;
    let q2 = critic.forward_batch(&states.hstack(second))?;
    let mut out = first.clone();
    for r in 0..states.rows() {
        if q2.get(r, 0) > q1.get(r, 0) {
            out.row_mut(r).copy_from_slice(second.row(r));
        }
    }
    Ok(out)
}

impl D4pgCore {
    pub fn new<R: Rng + ?Sized>(
        shape: &NetShape,
        params: CoreParams,
        rng: &mut R,
    ) -> Result<Self, AgentError> {
        let actors = [shape.actor(rng)?, shape.actor(rng)?];
        let critics = [shape.critic(rng)?, shape.critic(rng)?];
        Self::from_nets(actors, critics, params)
    }

    pub fn from_nets(
        actors: [MlpNet; 2],
        critics: [MlpNet; 2],
        params: CoreParams,
    ) -> Result<Self, AgentError> {
        let congruent = actors[0].is_congruent(&actors[1]) && critics[0].is_congruent(&critics[1]);
        if !congruent || critics[0].input_dim() != actors[0].input_dim() + actors[0].output_dim() {
            return Err(AgentError::Config("actor/critic pairs do not match".into()));
        }
        let (a, c) = (params.actor_optimizer, params.critic_optimizer);
        Ok(Self {
            actor_opts: [Adam::new(&actors[0], a)?, Adam::new(&actors[1], a)?],
            critic_opts: [Adam::new(&critics[0], c)?, Adam::new(&critics[1], c)?],
            target_actors: actors.clone(),
            target_critics: critics.clone(),
            actors,
            critics,
            params,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.actors[0].input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.actors[0].output_dim()
    }

    /// Greedy actions: per state, the actor whose proposal critic 1 prefers.
    pub fn act(&self, states: &Matrix) -> Result<Matrix, AgentError> {
        Self::act_with(&self.actors, &self.critics[0], states)
    }

    /// Same selection rule with caller-supplied (e.g. perturbed) actors.
    pub fn act_with(
        actors: &[MlpNet; 2],
        critic: &MlpNet,
        states: &Matrix,
    ) -> Result<Matrix, AgentError> {
        let a = actors[0].forward_batch(states)?;
        let b = actors[1].forward_batch(states)?;
        pick_by_critic(critic, states, &a, &b)
    }

    /// Bootstrap values `min(Q'_1, Q'_2)` at the selected target action.
    pub fn bootstrap(&self, next_states: &Matrix) -> Result<Vec<f64>, AgentError> {
        let next_actions =
            Self::act_with(&self.target_actors, &self.target_critics[0], next_states)?;
        let input = next_states.hstack(&next_actions);
        let q1 = self.target_critics[0].forward_batch(&input)?;
        let q2 = self.target_critics[1].forward_batch(&input)?;
        Ok(q1
            .as_slice()
            .iter()
            .zip(q2.as_slice())
            .map(|(a, b)| a.min(*b))
            .collect())
    }

    pub fn targets(&self, batch: &Batch) -> Result<Vec<f64>, AgentError> {
        batch.check(self.state_dim(), self.action_dim())?;
        let bootstrap = self.bootstrap(&batch.next_states)?;
        Ok(bellman_targets(
            &batch.rewards,
            &batch.dones,
            &bootstrap,
            self.params.gamma,
        ))
    }

    /// Reports critic 1's loss and actor 1's objective.
    pub fn update(&mut self, batch: &Batch) -> Result<UpdateStats, AgentError> {
        let targets = self.targets(batch)?;
        let mut losses = [0.0; 2];
        for (i, loss) in losses.iter_mut().enumerate() {
            *loss = critic_step(
                &mut self.critics[i],
                &mut self.critic_opts[i],
                &batch.states,
                &batch.actions,
                &targets,
            )?;
        }
        let mut objectives = [0.0; 2];
        for (i, obj) in objectives.iter_mut().enumerate() {
            *obj = actor_step(
                &mut self.actors[i],
                &mut self.actor_opts[i],
                &self.critics[0],
                &batch.states,
                self.params.head_penalty,
            )?;
        }
        self.soft_update()?;
        Ok(UpdateStats {
            critic_loss: losses[0],
            actor_objective: objectives[0],
        })
    }

    pub fn soft_update(&mut self) -> Result<(), AgentError> {
        let tau = self.params.tau;
        for i in 0..2 {
            self.target_actors[i].soft_update_from(&self.actors[i], tau)?;
            self.target_critics[i].soft_update_from(&self.critics[i], tau)?;
        }
        Ok(())
    }
}
