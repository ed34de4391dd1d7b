//! Run configuration, presets and the flat `key = value` config format.
//!
//! ```text
//! # comments start with '#'
//! algo = hddpg
//! scenario = 1
//! episodes = 300
//! hidden = 64,64
//! ```
//!
//! Keys are the field names of [`RunConfig`], [`AgentConfig`] and
//! [`SimParams`], plus `start_spread` and `random_heading`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::agents::AgentConfig;
use crate::maze::{load_map, presets, MazeMap, Point, SimParams, StartSpread};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ddpg,
    D4pg,
    Hddpg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Ddpg, Algorithm::D4pg, Algorithm::Hddpg];
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Ddpg => "ddpg",
            Algorithm::D4pg => "d4pg",
            Algorithm::Hddpg => "hddpg",
        })
    }
}

impl FromStr for Algorithm {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ddpg" => Ok(Algorithm::Ddpg),
            "d4pg" => Ok(Algorithm::D4pg),
            "hddpg" => Ok(Algorithm::Hddpg),
            _ => Err(HarnessError::Config(format!(
                "unknown algorithm {s:?} (expected ddpg, d4pg or hddpg)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Full-size maze and the published hyperparameters.
    Paper,
    /// 5 × 5 maze, smaller networks and budgets for a single CPU.
    Desk,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Paper => "paper",
            Preset::Desk => "desk",
        })
    }
}

impl FromStr for Preset {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            _ => Err(HarnessError::Config(format!(
                "unknown preset {s:?} (expected paper or desk)"
            ))),
        }
    }
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algo: Algorithm,
    pub scenario: u8,
    pub preset: Preset,
    /// `paper`, `desk`, or a path to an ASCII map file.
    pub map: String,
    pub episodes: usize,
    pub max_steps: usize,
    pub trials: usize,
    pub seed: u64,
    /// Greedy episodes run after training.
    pub eval_episodes: usize,
    /// Write a trace for every n-th training episode (0 disables).
    pub trace_every: usize,
    pub agent: AgentConfig,
    pub sim: SimParams,
    pub start_spread: StartSpread,
}

impl RunConfig {
    /// Published settings on the 10 × 10 maze.
    pub fn paper(algo: Algorithm, scenario: u8) -> Self {
        let (episodes, max_steps) = match scenario {
            2 => (700, 600),
            3 => (800, 1000),
            _ => (400, 300),
        };
        Self {
            algo,
            scenario,
            preset: Preset::Paper,
            map: "paper".into(),
            episodes,
            max_steps,
            trials: 10,
            seed: 0,
            eval_episodes: 50,
            trace_every: 0,
            agent: AgentConfig::default(),
            sim: SimParams::default(),
            start_spread: StartSpread::default(),
        }
    }

    /// Reduced settings on the 5 × 5 maze.
    pub fn desk(algo: Algorithm, scenario: u8) -> Self {
        let max_steps = match scenario {
            2 => 500,
            3 => 600,
            _ => 400,
        };
        Self {
            preset: Preset::Desk,
            map: "desk".into(),
            episodes: 300,
            max_steps,
            trials: 3,
            agent: AgentConfig {
                hidden: vec![64, 64],
                batch_size: 64,
                high_update_every: 4,
                relabel_steps: 10,
                ..AgentConfig::default()
            },
            ..Self::paper(algo, scenario)
        }
    }

    pub fn preset(preset: Preset, algo: Algorithm, scenario: u8) -> Self {
        match preset {
            Preset::Paper => Self::paper(algo, scenario),
            Preset::Desk => Self::desk(algo, scenario),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(1..=3).contains(&self.scenario) {
            return Err(HarnessError::Config(format!(
                "scenario must be 1, 2 or 3, got {}",
                self.scenario
            )));
        }
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be positive".into()));
        }
        self.agent.validate()?;
        let s = &self.sim;
        for (name, v) in [
            ("dt", s.dt),
            ("max_range", s.max_range),
            ("collision_distance", s.collision_distance),
            ("goal_distance", s.goal_distance),
            ("max_linear", s.max_linear),
            ("max_angular", s.max_angular),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(HarnessError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(s.progress_deadband.is_finite() && s.progress_deadband >= 0.0) {
            return Err(HarnessError::Config(
                "progress_deadband must be non-negative".into(),
            ));
        }
        if !(self.start_spread.position.is_finite() && self.start_spread.position >= 0.0) {
            return Err(HarnessError::Config(
                "start_spread must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Loads the configured map.
    pub fn load_map(&self) -> Result<MazeMap, HarnessError> {
        match self.map.as_str() {
            "paper" => Ok(presets::paper_map()),
            "desk" => Ok(presets::desk_map()),
            path => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| HarnessError::Io(format!("{path}: {e}")))?;
                load_map(&text).map_err(|e| HarnessError::Config(format!("{path}: {e}")))
            }
        }
    }

    /// The scenario's target on `map`.
    pub fn target(&self, map: &MazeMap) -> Result<Point, HarnessError> {
        map.target(self.scenario).ok_or_else(|| {
            HarnessError::Config(format!("map {} has no target {}", self.map, self.scenario))
        })
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
            value
                .parse()
                .map_err(|_| HarnessError::Config(format!("invalid value {value:?} for {key}")))
        }
        let a = &mut self.agent;
        let s = &mut self.sim;
        match key {
            "algo" => self.algo = value.parse()?,
            "scenario" => self.scenario = num(key, value)?,
            "preset" => self.preset = value.parse()?,
            "map" => self.map = value.to_string(),
            "episodes" => self.episodes = num(key, value)?,
            "max_steps" => self.max_steps = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "eval_episodes" => self.eval_episodes = num(key, value)?,
            "trace_every" => self.trace_every = num(key, value)?,
            "hidden" => {
                a.hidden = value
                    .split(',')
                    .map(|w| num(key, w.trim()))
                    .collect::<Result<_, _>>()?
            }
            "gamma" => a.gamma = num(key, value)?,
            "tau" => a.tau = num(key, value)?,
            "learning_rate" => a.learning_rate = num(key, value)?,
            "actor_learning_rate" => a.actor_learning_rate = num(key, value)?,
            "head_penalty" => a.head_penalty = num(key, value)?,
            "clip_norm" => a.clip_norm = num(key, value)?,
            "batch_size" => a.batch_size = num(key, value)?,
            "buffer_capacity" => a.buffer_capacity = num(key, value)?,
            "sigma0" => a.sigma0 = num(key, value)?,
            "noise_alpha" => a.noise_alpha = num(key, value)?,
            "noise_threshold" => a.noise_threshold = num(key, value)?,
            "kappa" => a.kappa = num(key, value)?,
            "subgoal_radius" => a.subgoal_radius = num(key, value)?,
            "subgoal_min_distance" => a.subgoal_min_distance = num(key, value)?,
            "subgoal_margin" => a.subgoal_margin = num(key, value)?,
            "subgoal_line_of_sight" => a.subgoal_line_of_sight = num(key, value)?,
            "subgoal_step_limit" => a.subgoal_step_limit = num(key, value)?,
            "candidate_std" => a.candidate_std = num(key, value)?,
            "relabel_steps" => a.relabel_steps = num(key, value)?,
            "reward_scale" => a.reward_scale = num(key, value)?,
            "high_update_every" => a.high_update_every = num(key, value)?,
            "dt" => s.dt = num(key, value)?,
            "max_range" => s.max_range = num(key, value)?,
            "collision_distance" => s.collision_distance = num(key, value)?,
            "goal_distance" => s.goal_distance = num(key, value)?,
            "max_linear" => s.max_linear = num(key, value)?,
            "max_angular" => s.max_angular = num(key, value)?,
            "progress_deadband" => s.progress_deadband = num(key, value)?,
            "start_spread" => self.start_spread.position = num(key, value)?,
            "random_heading" => self.start_spread.random_heading = num(key, value)?,
            _ => return Err(HarnessError::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }
}

/// Parses the flat config format into ordered `(key, value)` pairs.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, HarnessError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("line {}: expected key = value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Builds a config from layered settings: preset defaults, then `file`
/// pairs, then `overrides`. The preset, algorithm and scenario are resolved
/// first so that the right defaults are chosen.
pub fn resolve_config(
    file: &[(String, String)],
    overrides: &[(String, String)],
) -> Result<RunConfig, HarnessError> {
    let lookup = |key: &str| {
        overrides
            .iter()
            .rev()
            .chain(file.iter().rev())
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    };
    let preset = lookup("preset")
        .map(str::parse)
        .transpose()?
        .unwrap_or(Preset::Paper);
    let algo = lookup("algo")
        .map(str::parse)
        .transpose()?
        .unwrap_or(Algorithm::Hddpg);
    let scenario = match lookup("scenario") {
        Some(v) => v
            .parse()
            .map_err(|_| HarnessError::Config(format!("invalid scenario {v:?}")))?,
        None => 1,
    };
    let mut config = RunConfig::preset(preset, algo, scenario);
    for (k, v) in file.iter().chain(overrides) {
        config.set(k, v)?;
    }
    config.validate()?;
    Ok(config)
}
