//! Single actor-critic learner with target networks.

use rand::Rng;

use super::AgentError;
use crate::nn::{xavier_init, Activation, Adam, AdamConfig, Gradients, Matrix, MlpNet};

/// Discount and target-tracking rate shared by the actor-critic learners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoreParams {
    pub gamma: f64,
    pub tau: f64,
    pub actor_optimizer: AdamConfig,
    pub critic_optimizer: AdamConfig,
    /// Weight of the mean squared head pre-activation added to the actor loss.
    pub head_penalty: f64,
}

impl Default for CoreParams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            actor_optimizer: AdamConfig::default(),
            critic_optimizer: AdamConfig::default(),
            head_penalty: 0.0,
        }
    }
}

/// Shape of one actor-critic pair: state size, hidden widths and actor head.
#[derive(Debug, Clone, PartialEq)]
pub struct NetShape {
    pub state_dim: usize,
    pub hidden: Vec<usize>,
    pub head: Vec<(usize, Activation)>,
}

impl NetShape {
    pub fn action_dim(&self) -> usize {
        self.head.iter().map(|(n, _)| n).sum()
    }

    pub fn actor<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MlpNet, AgentError> {
        Ok(xavier_init(self.state_dim, &self.hidden, &self.head, rng)?)
    }

    pub fn critic<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MlpNet, AgentError> {
        Ok(xavier_init(
            self.state_dim + self.action_dim(),
            &self.hidden,
            &[(1, Activation::Identity)],
            rng,
        )?)
    }
}

/// A mini-batch in network units. Rewards are already scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Matrix,
    pub actions: Matrix,
    pub rewards: Vec<f64>,
    pub next_states: Matrix,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub(crate) fn check(&self, state_dim: usize, action_dim: usize) -> Result<(), AgentError> {
        let k = self.len();
        let ok = k > 0
            && self.dones.len() == k
            && self.states.rows() == k
            && self.actions.rows() == k
            && self.next_states.rows() == k
            && self.states.cols() == state_dim
            && self.next_states.cols() == state_dim
            && self.actions.cols() == action_dim;
        if ok {
            Ok(())
        } else {
            Err(AgentError::Config(format!(
                "batch of {k} does not fit state {state_dim} / action {action_dim}"
            )))
        }
    }
}

/// Losses reported by one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    /// Mean squared Bellman error before the critic step.
    pub critic_loss: f64,
    /// Mean critic value of the actor's actions before the actor step.
    pub actor_objective: f64,
}

/// `y = r` for terminal records, `r + γ·bootstrap` otherwise.
pub fn bellman_targets(rewards: &[f64], dones: &[bool], bootstrap: &[f64], gamma: f64) -> Vec<f64> {
    rewards
        .iter()
        .zip(dones)
        .zip(bootstrap)
        .map(|((&r, &done), &q)| if done { r } else { r + gamma * q })
        .collect()
}

/// One optimizer step of `critic` toward `targets` on `(states, actions)`.
/// Returns the loss before the step.
pub(crate) fn critic_step(
    critic: &mut MlpNet,
    opt: &mut Adam,
    states: &Matrix,
    actions: &Matrix,
    targets: &[f64],
) -> Result<f64, AgentError> {
    let k = targets.len() as f64;
    let trace = critic.forward_trace(&states.hstack(actions))?;
    let q = trace.output();
    let mut grad = Matrix::zeros(q.rows(), 1);
    let mut loss = 0.0;
    for (r, &y) in targets.iter().enumerate() {
        let err = q.get(r, 0) - y;
        loss += err * err / k;
        grad.set(r, 0, 2.0 * err / k);
    }
    if !loss.is_finite() {
        return Err(AgentError::NonFinite {
            what: "critic loss",
            detail: format!("loss {loss}, first target {:?}", targets.first()),
        });
    }
    let (grads, _) = critic.backward_batch(&trace, &grad)?;
    step_checked(critic, opt, &grads, "critic gradient")?;
    Ok(loss)
}

/// One optimizer step of `actor` along `∇_a Q(s, a)` of `critic`, i.e. on
/// the loss `−mean Q(s, π(s))`. Returns the mean Q before the step.
pub(crate) fn actor_step(
    actor: &mut MlpNet,
    opt: &mut Adam,
    critic: &MlpNet,
    states: &Matrix,
    head_penalty: f64,
) -> Result<f64, AgentError> {
    let k = states.rows() as f64;
    let actor_trace = actor.forward_trace(states)?;
    let actions = actor_trace.output();
    let critic_trace = critic.forward_trace(&states.hstack(actions))?;
    let q = critic_trace.output();
    let objective = q.as_slice().iter().sum::<f64>() / k;
    if !objective.is_finite() {
        return Err(AgentError::NonFinite {
            what: "actor objective",
            detail: format!("mean Q {objective}"),
        });
    }
    let dq = Matrix::from_vec(q.rows(), 1, vec![-1.0 / k; q.rows()]);
    let (_, d_input) = critic.backward_batch(&critic_trace, &dq)?;
    let d_action = d_input.columns(states.cols(), d_input.cols());
    let (grads, _) = if head_penalty > 0.0 {
        let mut dz = actor.head_preactivations(&actor_trace)?;
        let c = 2.0 * head_penalty / dz.as_slice().len() as f64;
        dz.as_mut_slice().iter_mut().for_each(|z| *z *= c);
        actor.backward_batch_with_head(&actor_trace, &d_action, &dz)?
    } else {
        actor.backward_batch(&actor_trace, &d_action)?
    };
    step_checked(actor, opt, &grads, "actor gradient")?;
    Ok(objective)
}

fn step_checked(
    net: &mut MlpNet,
    opt: &mut Adam,
    grads: &Gradients,
    what: &'static str,
) -> Result<(), AgentError> {
    if !grads.is_finite() {
        return Err(AgentError::NonFinite {
            what,
            detail: format!("gradient norm {}", grads.global_norm()),
        });
    }
    opt.step(net, grads)?;
    Ok(())
}

/// Online and target actor-critic pair with their optimizers.
#[derive(Debug, Clone)]
pub struct DdpgCore {
    pub actor: MlpNet,
    pub critic: MlpNet,
    pub target_actor: MlpNet,
    pub target_critic: MlpNet,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
    pub params: CoreParams,
}

impl DdpgCore {
    pub fn new<R: Rng + ?Sized>(
        shape: &NetShape,
        params: CoreParams,
        rng: &mut R,
    ) -> Result<Self, AgentError> {
        let actor = shape.actor(rng)?;
        let critic = shape.critic(rng)?;
        Self::from_nets(actor, critic, params)
    }

    /// Builds a core whose targets start as copies of the online nets.
    pub fn from_nets(
        actor: MlpNet,
        critic: MlpNet,
        params: CoreParams,
    ) -> Result<Self, AgentError> {
        if critic.input_dim() != actor.input_dim() + actor.output_dim() || critic.output_dim() != 1
        {
            return Err(AgentError::Config(
                "critic does not take (state, action)".into(),
            ));
        }
        Ok(Self {
            actor_opt: Adam::new(&actor, params.actor_optimizer)?,
            critic_opt: Adam::new(&critic, params.critic_optimizer)?,
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            params,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.output_dim()
    }

    /// Greedy action heads for a batch of states.
    pub fn act(&self, states: &Matrix) -> Result<Matrix, AgentError> {
        Ok(self.actor.forward_batch(states)?)
    }

    pub fn q_values(&self, states: &Matrix, actions: &Matrix) -> Result<Vec<f64>, AgentError> {
        Ok(self
            .critic
            .forward_batch(&states.hstack(actions))?
            .into_vec())
    }

    /// Bellman targets from the target networks.
    pub fn targets(&self, batch: &Batch) -> Result<Vec<f64>, AgentError> {
        batch.check(self.state_dim(), self.action_dim())?;
        let next_actions = self.target_actor.forward_batch(&batch.next_states)?;
        let bootstrap = self
            .target_critic
            .forward_batch(&batch.next_states.hstack(&next_actions))?
            .into_vec();
        Ok(bellman_targets(
            &batch.rewards,
            &batch.dones,
            &bootstrap,
            self.params.gamma,
        ))
    }

    /// Critic regression, actor ascent and soft target update.
    pub fn update(&mut self, batch: &Batch) -> Result<UpdateStats, AgentError> {
        let targets = self.targets(batch)?;
        let critic_loss = critic_step(
            &mut self.critic,
            &mut self.critic_opt,
            &batch.states,
            &batch.actions,
            &targets,
        )?;
        let actor_objective = actor_step(
            &mut self.actor,
            &mut self.actor_opt,
            &self.critic,
            &batch.states,
            self.params.head_penalty,
        )?;
        self.soft_update()?;
        Ok(UpdateStats {
            critic_loss,
            actor_objective,
        })
    }

    /// Critic-only update with the actor held fixed.
    pub fn update_critic(&mut self, batch: &Batch) -> Result<f64, AgentError> {
        let targets = self.targets(batch)?;
        critic_step(
            &mut self.critic,
            &mut self.critic_opt,
            &batch.states,
            &batch.actions,
            &targets,
        )
    }

    pub fn soft_update(&mut self) -> Result<(), AgentError> {
        self.target_actor
            .soft_update_from(&self.actor, self.params.tau)?;
        self.target_critic
            .soft_update_from(&self.critic, self.params.tau)?;
        Ok(())
    }
}
