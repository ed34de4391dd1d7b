//! Single-level baselines steering straight at the final goal.

use rand::Rng;

use super::d4pg::D4pgCore;
use super::ddpg::{Batch, DdpgCore};
use super::hddpg::{low_shape, perturbation_distance};
use super::noise::NoiseState;
use super::subgoal::select_low_action;
use super::{trace_row, trace_start, AgentConfig, AgentError, EpisodeOutcome, Mode};
use crate::maze::{Action, MazeEnv, OBS_DIM};
use crate::nn::{Matrix, MlpNet};
use crate::replay::{LowTransition, ReplayBuffer};

#[derive(Debug, Clone)]
pub enum FlatCore {
    Ddpg(DdpgCore),
    D4pg(D4pgCore),
}

#[derive(Debug, Clone)]
pub struct FlatAgent {
    pub core: FlatCore,
    pub noise: NoiseState,
    pub buffer: ReplayBuffer<LowTransition>,
    pub config: AgentConfig,
    steps_trained: u64,
}

/// Actors used to act during one episode.
enum Policy {
    Single(MlpNet),
    Double([MlpNet; 2]),
}

impl FlatAgent {
    pub fn ddpg<R: Rng + ?Sized>(config: AgentConfig, rng: &mut R) -> Result<Self, AgentError> {
        config.validate()?;
        let core = DdpgCore::new(&low_shape(&config.hidden), config.core_params(), rng)?;
        Self::from_core(FlatCore::Ddpg(core), config)
    }

    pub fn d4pg<R: Rng + ?Sized>(config: AgentConfig, rng: &mut R) -> Result<Self, AgentError> {
        config.validate()?;
        let core = D4pgCore::new(&low_shape(&config.hidden), config.core_params(), rng)?;
        Self::from_core(FlatCore::D4pg(core), config)
    }

    pub fn from_core(core: FlatCore, config: AgentConfig) -> Result<Self, AgentError> {
        config.validate()?;
        let (state_dim, action_dim) = match &core {
            FlatCore::Ddpg(c) => (c.state_dim(), c.action_dim()),
            FlatCore::D4pg(c) => (c.state_dim(), c.action_dim()),
        };
        if state_dim != OBS_DIM || action_dim != 2 {
            return Err(AgentError::Config(
                "flat core must map 16 inputs to 2 outputs".into(),
            ));
        }
        Ok(Self {
            core,
            noise: config.initial_noise(),
            buffer: ReplayBuffer::new(config.buffer_capacity)?,
            config,
            steps_trained: 0,
        })
    }

    pub fn steps_trained(&self) -> u64 {
        self.steps_trained
    }

    pub(crate) fn set_steps_trained(&mut self, n: u64) {
        self.steps_trained = n;
    }

    fn policy<R: Rng + ?Sized>(&self, mode: Mode, rng: &mut R) -> Result<Policy, AgentError> {
        let sigma = self.noise.sigma;
        Ok(match (&self.core, mode) {
            (FlatCore::Ddpg(c), Mode::Train) => Policy::Single(c.actor.perturbed(sigma, rng)?),
            (FlatCore::Ddpg(c), Mode::Greedy) => Policy::Single(c.actor.clone()),
            (FlatCore::D4pg(c), Mode::Train) => Policy::Double([
                c.actors[0].perturbed(sigma, rng)?,
                c.actors[1].perturbed(sigma, rng)?,
            ]),
            (FlatCore::D4pg(c), Mode::Greedy) => Policy::Double(c.actors.clone()),
        })
    }

    fn act(
        &self,
        policy: &Policy,
        features: &[f64; OBS_DIM],
        env: &MazeEnv,
    ) -> Result<Action, AgentError> {
        let params = env.params();
        match (policy, &self.core) {
            (Policy::Single(actor), _) => Ok(select_low_action(actor, features, params)?.0),
            (Policy::Double(actors), FlatCore::D4pg(core)) => {
                let head =
                    D4pgCore::act_with(actors, &core.critics[0], &Matrix::row_vector(features))?;
                Ok(Action::new(
                    head.get(0, 0) * params.max_linear,
                    head.get(0, 1) * params.max_angular,
                ))
            }
            (Policy::Double(_), FlatCore::Ddpg(_)) => {
                unreachable!("double policy only built for D4PG")
            }
        }
    }

    /// One episode toward the final goal. The flat reward is both the
    /// training signal and the score.
    pub fn run_episode<R: Rng + ?Sized>(
        &mut self,
        env: &mut MazeEnv,
        max_steps: usize,
        mode: Mode,
        trace: bool,
        rng: &mut R,
    ) -> Result<EpisodeOutcome, AgentError> {
        let train = mode == Mode::Train;
        let mut out = EpisodeOutcome::default();
        env.reset(rng);
        if trace {
            out.trace.push(trace_start(env));
        }
        let policy = self.policy(mode, rng)?;
        let params = *env.params();
        let goal = env.final_goal();
        for _ in 0..max_steps {
            let features = env.scaling().normalize(&env.observe(goal));
            let action = self.act(&policy, &features, env)?;
            let step = env.step(action, goal);
            out.steps += 1;
            out.score += step.flat_reward;
            out.low_reward_sum += step.flat_reward;
            if trace {
                out.trace.push(trace_row(env, out.steps, &step));
            }
            if train {
                self.buffer.push(LowTransition {
                    state: features,
                    subgoal: [0.0, 0.0],
                    action: [
                        step.applied.linear / params.max_linear,
                        step.applied.angular / params.max_angular,
                    ],
                    reward: step.flat_reward,
                    next_state: env.scaling().normalize(&step.observation),
                    done: step.collision || step.goal_reached,
                })?;
                self.learn_step(rng)?;
            }
            if step.collision {
                out.collision = true;
                break;
            }
            if step.goal_reached {
                out.success = true;
                break;
            }
        }
        if train && max_steps > 0 {
            self.adapt_noise(rng)?;
        }
        out.sigma = [self.noise.sigma, 0.0];
        Ok(out)
    }

    fn learn_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), AgentError> {
        self.steps_trained += 1;
        let k = self.config.batch_size;
        if self.buffer.len() < k {
            return Ok(());
        }
        let records = self.buffer.sample(k, rng)?;
        let mut states = Matrix::zeros(k, OBS_DIM);
        let mut next_states = Matrix::zeros(k, OBS_DIM);
        let mut actions = Matrix::zeros(k, 2);
        for (i, r) in records.iter().enumerate() {
            states.row_mut(i).copy_from_slice(&r.state);
            next_states.row_mut(i).copy_from_slice(&r.next_state);
            actions.row_mut(i).copy_from_slice(&r.action);
        }
        let batch = Batch {
            states,
            actions,
            rewards: records
                .iter()
                .map(|r| r.reward * self.config.reward_scale)
                .collect(),
            next_states,
            dones: records.iter().map(|r| r.done).collect(),
        };
        match &mut self.core {
            FlatCore::Ddpg(c) => c.update(&batch)?,
            FlatCore::D4pg(c) => c.update(&batch)?,
        };
        Ok(())
    }

    /// For D4PG the distance is the RMS over both actors.
    fn adapt_noise<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), AgentError> {
        if self.buffer.is_empty() {
            return Ok(());
        }
        let n = self.config.batch_size.min(self.buffer.len());
        let records = self.buffer.sample(n, rng)?;
        let states = Matrix::from_rows(&records.iter().map(|r| r.state).collect::<Vec<_>>());
        let sigma = self.noise.sigma;
        let d = match &self.core {
            FlatCore::Ddpg(c) => perturbation_distance(&c.actor, sigma, &states, rng)?,
            FlatCore::D4pg(c) => {
                let d0 = perturbation_distance(&c.actors[0], sigma, &states, rng)?;
                let d1 = perturbation_distance(&c.actors[1], sigma, &states, rng)?;
                ((d0 * d0 + d1 * d1) / 2.0).sqrt()
            }
        };
        self.noise = self.noise.adapt(d);
        Ok(())
    }
}
