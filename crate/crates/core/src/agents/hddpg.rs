//! Two-level agent: a high-level learner emitting nearby subgoals and a
//! low-level learner driving the robot toward them.

use rand::Rng;

use super::ddpg::{Batch, DdpgCore, NetShape};
use super::noise::{policy_distance, NoiseState};
use super::subgoal::{
    best_candidate, candidate_scores_limited, relabel_candidates, select_low_action, select_subgoal,
};
use super::{trace_row, trace_start, AgentConfig, AgentError, EpisodeOutcome, Mode};
use crate::maze::{high_reward, MazeEnv, MazeMap, Point, OBS_DIM};
use crate::nn::{Activation, Matrix, MlpNet};
use crate::replay::{HighTransition, LowState, LowTransition, ReplayBuffer};

pub const HIGH_STATE_DIM: usize = 4;

/// High-level state: robot position and final goal, each divided by the
/// maze half extents.
pub fn high_state(map: &MazeMap, position: Point, goal: Point) -> [f64; HIGH_STATE_DIM] {
    let (hw, hh) = (map.half_width(), map.half_height());
    [position.x / hw, position.y / hh, goal.x / hw, goal.y / hh]
}

pub(crate) fn low_shape(hidden: &[usize]) -> NetShape {
    NetShape {
        state_dim: OBS_DIM,
        hidden: hidden.to_vec(),
        head: vec![(1, Activation::Sigmoid), (1, Activation::Tanh)],
    }
}

pub(crate) fn high_shape(hidden: &[usize]) -> NetShape {
    NetShape {
        state_dim: HIGH_STATE_DIM,
        hidden: hidden.to_vec(),
        head: vec![(2, Activation::Tanh)],
    }
}

#[derive(Debug, Clone)]
pub struct HddpgAgent {
    pub high: DdpgCore,
    pub low: DdpgCore,
    pub high_noise: NoiseState,
    pub low_noise: NoiseState,
    pub high_buffer: ReplayBuffer<HighTransition>,
    pub low_buffer: ReplayBuffer<LowTransition>,
    pub config: AgentConfig,
    steps_trained: u64,
}

/// The open subgoal segment.
struct Segment {
    start: Point,
    subgoal: Point,
    states: Vec<LowState>,
    actions: Vec<[f64; 2]>,
    low_sum: f64,
}

impl HddpgAgent {
    pub fn new<R: Rng + ?Sized>(config: AgentConfig, rng: &mut R) -> Result<Self, AgentError> {
        config.validate()?;
        let params = config.core_params();
        let high = DdpgCore::new(&high_shape(&config.hidden), params, rng)?;
        let low = DdpgCore::new(&low_shape(&config.hidden), params, rng)?;
        Self::from_cores(high, low, config)
    }

    pub fn from_cores(
        high: DdpgCore,
        low: DdpgCore,
        config: AgentConfig,
    ) -> Result<Self, AgentError> {
        config.validate()?;
        if high.state_dim() != HIGH_STATE_DIM || high.action_dim() != 2 {
            return Err(AgentError::Config(
                "high-level core must map 4 inputs to 2 outputs".into(),
            ));
        }
        if low.state_dim() != OBS_DIM || low.action_dim() != 2 {
            return Err(AgentError::Config(
                "low-level core must map 16 inputs to 2 outputs".into(),
            ));
        }
        Ok(Self {
            high,
            low,
            high_noise: config.initial_noise(),
            low_noise: config.initial_noise(),
            high_buffer: ReplayBuffer::new(config.buffer_capacity)?,
            low_buffer: ReplayBuffer::new(config.buffer_capacity)?,
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

    /// One episode of the two-level loop. In training mode the actors are
    /// perturbed once at the start, every step is stored and learned from,
    /// and both noise scales adapt at the end.
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
        let (high_actor, low_actor) = if train {
            (
                self.high.actor.perturbed(self.high_noise.sigma, rng)?,
                self.low.actor.perturbed(self.low_noise.sigma, rng)?,
            )
        } else {
            (self.high.actor.clone(), self.low.actor.clone())
        };
        let params = *env.params();
        let geometry = self.config.subgoal_geometry();
        let goal = env.final_goal();
        let mut segment: Option<Segment> = None;

        for t in 0..max_steps {
            let seg = match &mut segment {
                Some(seg) => seg,
                None => {
                    let pos = env.state().position;
                    let hs = high_state(env.map(), pos, goal);
                    let subgoal = select_subgoal(&high_actor, &hs, pos, env.map(), &geometry)?;
                    out.subgoals += 1;
                    segment.insert(Segment {
                        start: pos,
                        subgoal,
                        states: Vec::new(),
                        actions: Vec::new(),
                        low_sum: 0.0,
                    })
                }
            };
            let obs = env.observe(seg.subgoal);
            let features = env.scaling().normalize(&obs);
            let (action, _) = select_low_action(&low_actor, &features, &params)?;
            let step = env.step(action, seg.subgoal);
            let head = [
                step.applied.linear / params.max_linear,
                step.applied.angular / params.max_angular,
            ];
            out.steps += 1;
            out.score += step.flat_reward;
            out.low_reward_sum += step.low_reward;
            seg.states.push(LowState {
                features,
                pose: obs.pose,
            });
            seg.actions.push(head);
            seg.low_sum += step.low_reward;
            if trace {
                out.trace.push(trace_row(env, out.steps, &step));
            }
            let displacement = seg.subgoal - seg.start;

            if train {
                self.low_buffer.push(LowTransition {
                    state: features,
                    subgoal: geometry.head(displacement),
                    action: head,
                    reward: step.low_reward,
                    next_state: env.scaling().normalize(&step.observation),
                    done: step.collision || step.subgoal_reached,
                })?;
            }

            let episode_over = step.collision || step.goal_reached || t + 1 == max_steps;
            let closes = step.subgoal_reached
                || seg.actions.len() >= self.config.subgoal_step_limit
                || episode_over;
            if closes {
                let seg = segment.take().expect("segment is open");
                if train {
                    let end = env.state().position;
                    self.high_buffer.push(HighTransition {
                        start: [seg.start.x, seg.start.y],
                        final_goal: [goal.x, goal.y],
                        subgoal: [displacement.x, displacement.y],
                        reward: high_reward(
                            step.collision,
                            step.goal_reached,
                            seg.low_sum,
                            self.config.kappa,
                        ),
                        end: [end.x, end.y],
                        states: seg.states,
                        actions: seg.actions,
                        done: step.collision || step.goal_reached,
                    })?;
                }
            }
            if train {
                self.learn_step(env, rng)?;
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
            self.adapt_noise(env.map(), rng)?;
        }
        out.sigma = [self.low_noise.sigma, self.high_noise.sigma];
        Ok(out)
    }

    fn learn_step<R: Rng + ?Sized>(
        &mut self,
        env: &MazeEnv,
        rng: &mut R,
    ) -> Result<(), AgentError> {
        self.steps_trained += 1;
        let k = self.config.batch_size;
        if self.low_buffer.len() >= k {
            let batch = self.low_batch(k, rng)?;
            self.low.update(&batch)?;
        }
        if self.high_buffer.len() >= k
            && self.steps_trained % self.config.high_update_every as u64 == 0
        {
            let batch = self.high_batch(env, k, rng)?;
            self.high.update(&batch)?;
        }
        Ok(())
    }

    fn low_batch<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Batch, AgentError> {
        let records = self.low_buffer.sample(k, rng)?;
        let scale = self.config.reward_scale;
        let mut states = Matrix::zeros(k, OBS_DIM);
        let mut next_states = Matrix::zeros(k, OBS_DIM);
        let mut actions = Matrix::zeros(k, 2);
        for (i, r) in records.iter().enumerate() {
            states.row_mut(i).copy_from_slice(&r.state);
            next_states.row_mut(i).copy_from_slice(&r.next_state);
            actions.row_mut(i).copy_from_slice(&r.action);
        }
        Ok(Batch {
            states,
            actions,
            rewards: records.iter().map(|r| r.reward * scale).collect(),
            next_states,
            dones: records.iter().map(|r| r.done).collect(),
        })
    }

    /// High-level batch with every subgoal relabeled by the current low actor.
    fn high_batch<R: Rng + ?Sized>(
        &self,
        env: &MazeEnv,
        k: usize,
        rng: &mut R,
    ) -> Result<Batch, AgentError> {
        let records = self.high_buffer.sample(k, rng)?;
        let map = env.map();
        let cfg = &self.config;
        let geometry = cfg.subgoal_geometry();
        let candidates = records
            .iter()
            .map(|r| relabel_candidates(r, map, &geometry, cfg.candidate_std, rng))
            .collect::<Result<Vec<_>, _>>()?;
        let scores = candidate_scores_limited(
            &self.low.actor,
            env.scaling(),
            &records,
            &candidates,
            cfg.relabel_steps,
        )?;
        let mut states = Matrix::zeros(k, HIGH_STATE_DIM);
        let mut next_states = Matrix::zeros(k, HIGH_STATE_DIM);
        let mut actions = Matrix::zeros(k, 2);
        for (i, r) in records.iter().enumerate() {
            let g = Point::new(r.final_goal[0], r.final_goal[1]);
            let start = Point::new(r.start[0], r.start[1]);
            let end = Point::new(r.end[0], r.end[1]);
            states
                .row_mut(i)
                .copy_from_slice(&high_state(map, start, g));
            next_states
                .row_mut(i)
                .copy_from_slice(&high_state(map, end, g));
            let chosen = candidates[i][best_candidate(&scores[i])];
            actions.row_mut(i).copy_from_slice(&geometry.head(chosen));
        }
        Ok(Batch {
            states,
            actions,
            rewards: records
                .iter()
                .map(|r| r.reward * cfg.reward_scale)
                .collect(),
            next_states,
            dones: records.iter().map(|r| r.done).collect(),
        })
    }

    /// Measures how far a fresh perturbation at the current scale moves each
    /// actor on replayed states, and adapts the scale accordingly.
    fn adapt_noise<R: Rng + ?Sized>(
        &mut self,
        map: &MazeMap,
        rng: &mut R,
    ) -> Result<(), AgentError> {
        let k = self.config.batch_size;
        if !self.low_buffer.is_empty() {
            let n = k.min(self.low_buffer.len());
            let records = self.low_buffer.sample(n, rng)?;
            let states = Matrix::from_rows(&records.iter().map(|r| r.state).collect::<Vec<_>>());
            let d = perturbation_distance(&self.low.actor, self.low_noise.sigma, &states, rng)?;
            self.low_noise = self.low_noise.adapt(d);
        }
        if !self.high_buffer.is_empty() {
            let n = k.min(self.high_buffer.len());
            let records = self.high_buffer.sample(n, rng)?;
            let rows: Vec<[f64; HIGH_STATE_DIM]> = records
                .iter()
                .map(|r| {
                    let g = Point::new(r.final_goal[0], r.final_goal[1]);
                    high_state(map, Point::new(r.start[0], r.start[1]), g)
                })
                .collect();
            let states = Matrix::from_rows(&rows);
            let d = perturbation_distance(&self.high.actor, self.high_noise.sigma, &states, rng)?;
            self.high_noise = self.high_noise.adapt(d);
        }
        Ok(())
    }
}

pub(crate) fn perturbation_distance<R: Rng + ?Sized>(
    actor: &MlpNet,
    sigma: f64,
    states: &Matrix,
    rng: &mut R,
) -> Result<f64, AgentError> {
    let perturbed = actor.perturbed(sigma, rng)?;
    policy_distance(actor, &perturbed, states)
}
