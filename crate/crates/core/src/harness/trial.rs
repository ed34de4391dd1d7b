//! Seeded trials: train, then evaluate the greedy policy.

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, RunConfig};
use super::output::trial_dir;
use super::HarnessError;
use crate::agents::{Agent, EpisodeOutcome, FlatAgent, HddpgAgent, Mode};
use crate::maze::{MazeEnv, TraceRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub success: bool,
    pub steps: usize,
    /// Cumulative flat reward.
    pub score: f64,
    pub low_reward: f64,
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub wall_seconds: f64,
}

impl EpisodeRecord {
    fn from_outcome(episode: usize, out: &EpisodeOutcome, wall_seconds: f64) -> Self {
        Self {
            episode,
            success: out.success,
            steps: out.steps,
            score: out.score,
            low_reward: out.low_reward_sum,
            sigma_low: out.sigma[0],
            sigma_high: out.sigma[1],
            wall_seconds,
        }
    }
}

/// Success rate and average score. Both are `None` for an empty list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: Option<f64>,
    pub average_score: Option<f64>,
}

impl Metrics {
    pub fn of(records: &[EpisodeRecord]) -> Self {
        match compute_metrics(records) {
            Ok((sr, avg)) => Self {
                episodes: records.len(),
                successes: records.iter().filter(|r| r.success).count(),
                success_rate: Some(sr),
                average_score: Some(avg),
            },
            Err(_) => Self {
                episodes: 0,
                successes: 0,
                success_rate: None,
                average_score: None,
            },
        }
    }
}

/// `(successes / N, mean score)`.
pub fn compute_metrics(records: &[EpisodeRecord]) -> Result<(f64, f64), HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Config(
            "metrics need at least one episode".into(),
        ));
    }
    let n = records.len() as f64;
    let successes = records.iter().filter(|r| r.success).count() as f64;
    let total: f64 = records.iter().map(|r| r.score).sum();
    Ok((successes / n, total / n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub config_hash: String,
    pub train: Metrics,
    pub eval: Metrics,
    pub episodes: Vec<EpisodeRecord>,
    pub eval_episodes: Vec<EpisodeRecord>,
    pub wall_seconds: f64,
    /// Per-step traces of selected training episodes, keyed by episode index.
    #[serde(skip)]
    pub traces: Vec<(usize, Vec<TraceRow>)>,
}

/// Seed of trial `trial` under base seed `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_add(trial as u64)
}

pub fn build_agent(config: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Agent, HarnessError> {
    let a = config.agent.clone();
    Ok(match config.algo {
        Algorithm::Ddpg => Agent::Flat(FlatAgent::ddpg(a, rng)?),
        Algorithm::D4pg => Agent::Flat(FlatAgent::d4pg(a, rng)?),
        Algorithm::Hddpg => Agent::Hierarchical(HddpgAgent::new(a, rng)?),
    })
}

pub fn build_env(config: &RunConfig) -> Result<MazeEnv, HarnessError> {
    let map = config.load_map()?;
    let goal = config.target(&map)?;
    Ok(MazeEnv::new(map, config.sim, config.start_spread, goal))
}

/// Greedy episodes of `agent`, each starting from a fresh seeded reset.
pub fn evaluate(
    agent: &mut Agent,
    env: &mut MazeEnv,
    config: &RunConfig,
    seed: u64,
    episodes: usize,
) -> Result<Vec<EpisodeRecord>, HarnessError> {
    Ok(evaluate_traced(agent, env, config, seed, episodes, 0)?.0)
}

/// [`evaluate`] that also returns the traces of the first `traced` episodes.
pub fn evaluate_traced(
    agent: &mut Agent,
    env: &mut MazeEnv,
    config: &RunConfig,
    seed: u64,
    episodes: usize,
    traced: usize,
) -> Result<(Vec<EpisodeRecord>, Vec<(usize, Vec<TraceRow>)>), HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut records = Vec::with_capacity(episodes);
    let mut traces = Vec::new();
    for i in 0..episodes {
        let t = Instant::now();
        let out = agent
            .run_episode(env, config.max_steps, Mode::Greedy, i < traced, &mut rng)
            .map_err(|e| HarnessError::Training {
                episode: i,
                source: e,
            })?;
        records.push(EpisodeRecord::from_outcome(
            i,
            &out,
            t.elapsed().as_secs_f64(),
        ));
        if i < traced {
            traces.push((i, out.trace));
        }
    }
    Ok((records, traces))
}

/// Called with the trial index and each finished training episode.
pub type Progress<'a> = &'a (dyn Fn(usize, &EpisodeRecord) + Sync);

/// Trains a fresh agent for `config.episodes` episodes, then evaluates it.
/// Returns the summary and the trained agent.
pub fn run_trial_with_agent(
    config: &RunConfig,
    trial: usize,
    progress: Option<Progress>,
) -> Result<(TrialSummary, Agent), HarnessError> {
    config.validate()?;
    let started = Instant::now();
    let seed = trial_seed(config.seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = build_env(config)?;
    let mut agent = build_agent(config, &mut rng)?;
    let mut episodes = Vec::with_capacity(config.episodes);
    let mut traces = Vec::new();
    for i in 0..config.episodes {
        let trace = config.trace_every > 0 && i % config.trace_every == 0;
        let t = Instant::now();
        let out = agent
            .run_episode(&mut env, config.max_steps, Mode::Train, trace, &mut rng)
            .map_err(|e| HarnessError::Training {
                episode: i,
                source: e,
            })?;
        let record = EpisodeRecord::from_outcome(i, &out, t.elapsed().as_secs_f64());
        if let Some(p) = progress {
            p(trial, &record);
        }
        episodes.push(record);
        if trace {
            traces.push((i, out.trace));
        }
    }
    let eval_episodes = if config.episodes > 0 {
        evaluate(&mut agent, &mut env, config, seed, config.eval_episodes)?
    } else {
        Vec::new()
    };
    let summary = TrialSummary {
        trial,
        seed,
        config_hash: config.hash(),
        train: Metrics::of(&episodes),
        eval: Metrics::of(&eval_episodes),
        episodes,
        eval_episodes,
        wall_seconds: started.elapsed().as_secs_f64(),
        traces,
    };
    Ok((summary, agent))
}

pub fn run_trial(config: &RunConfig, trial: usize) -> Result<TrialSummary, HarnessError> {
    Ok(run_trial_with_agent(config, trial, None)?.0)
}

/// Worker count from `HDDPG_THREADS` (default 1).
pub fn thread_count() -> usize {
    std::env::var("HDDPG_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

/// Runs every trial of `config`, at most `threads` at a time. Results come
/// back in trial order. With `checkpoints`, each trained agent is saved to
/// `<checkpoints>/trial_<k>/checkpoint`.
pub fn run_trials(
    config: &RunConfig,
    threads: usize,
    checkpoints: Option<&Path>,
    progress: Option<Progress>,
) -> Result<Vec<TrialSummary>, HarnessError> {
    let threads = threads.max(1).min(config.trials.max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<TrialSummary, HarnessError>>> =
        (0..config.trials).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= config.trials {
                    break;
                }
                let r = run_trial_with_agent(config, i, progress).and_then(|(summary, agent)| {
                    if let Some(root) = checkpoints {
                        agent.save(&trial_dir(root, i).join("checkpoint"))?;
                    }
                    Ok(summary)
                });
                results.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|r| r.expect("every trial ran"))
        .collect()
}
