//! Experiment driver: configuration, seeded trials, metrics and result files.

mod config;
mod output;
pub mod selftest;
mod trial;

use thiserror::Error;

use crate::agents::AgentError;

pub use config::{parse_config_text, resolve_config, Algorithm, Preset, RunConfig};
pub use output::{
    emit_results, trial_dir, write_episodes_csv, Aggregate, RunSummary, SUMMARY_FORMAT,
    SUMMARY_VERSION,
};
pub use trial::{
    build_agent, build_env, compute_metrics, evaluate, evaluate_traced, run_trial,
    run_trial_with_agent, run_trials, thread_count, trial_seed, EpisodeRecord, Metrics, Progress,
    TrialSummary,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("training failed in episode {episode}: {source}")]
    Training {
        episode: usize,
        #[source]
        source: AgentError,
    },
    #[error(transparent)]
    Agent(#[from] AgentError),
}
