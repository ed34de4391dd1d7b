//! Result files.
//!
//! ```text
//! <out>/summary.json              run config, per-trial metrics and series
//! <out>/trial_<k>/episodes.csv    episode,success,steps,score (training)
//! <out>/trial_<k>/eval.csv        same columns for the greedy evaluation
//! <out>/trial_<k>/trace_<ep>.csv  per-step pose and command of episode <ep>
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::trial::{EpisodeRecord, TrialSummary};
use super::HarnessError;
use crate::maze::write_trace;

pub const SUMMARY_FORMAT: &str = "hddpg-summary";
pub const SUMMARY_VERSION: u32 = 1;

/// Means over trials of the per-trial rates; `None` when no trial has one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub train_success_rate: Option<f64>,
    pub train_average_score: Option<f64>,
    pub eval_success_rate: Option<f64>,
    pub eval_average_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub format: String,
    pub version: u32,
    pub config: RunConfig,
    pub config_hash: String,
    pub aggregate: Aggregate,
    pub trials: Vec<TrialSummary>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl RunSummary {
    pub fn new(config: &RunConfig, trials: Vec<TrialSummary>) -> Self {
        let aggregate = Aggregate {
            train_success_rate: mean(trials.iter().map(|t| t.train.success_rate)),
            train_average_score: mean(trials.iter().map(|t| t.train.average_score)),
            eval_success_rate: mean(trials.iter().map(|t| t.eval.success_rate)),
            eval_average_score: mean(trials.iter().map(|t| t.eval.average_score)),
        };
        Self {
            format: SUMMARY_FORMAT.into(),
            version: SUMMARY_VERSION,
            config: config.clone(),
            config_hash: config.hash(),
            aggregate,
            trials,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let s: RunSummary =
            serde_json::from_str(text).map_err(|e| HarnessError::Io(format!("summary: {e}")))?;
        if s.format != SUMMARY_FORMAT || s.version != SUMMARY_VERSION {
            return Err(HarnessError::Io(format!(
                "unsupported summary {} v{}",
                s.format, s.version
            )));
        }
        Ok(s)
    }
}

fn io(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

#[derive(Serialize)]
struct CsvRow {
    episode: usize,
    success: u8,
    steps: usize,
    score: f64,
}

/// Writes `episode,success,steps,score` rows.
pub fn write_episodes_csv<W: Write>(out: W, records: &[EpisodeRecord]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(CsvRow {
            episode: r.episode,
            success: r.success as u8,
            steps: r.steps,
            score: r.score,
        })?;
    }
    if records.is_empty() {
        w.write_record(["episode", "success", "steps", "score"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn trial_dir(out: &Path, trial: usize) -> PathBuf {
    out.join(format!("trial_{trial}"))
}

/// Writes every result file under `out`.
pub fn emit_results(summary: &RunSummary, out: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(out).map_err(|e| io(out, e))?;
    let path = out.join("summary.json");
    fs::write(&path, summary.to_json()).map_err(|e| io(&path, e))?;
    for t in &summary.trials {
        let dir = trial_dir(out, t.trial);
        fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        for (name, records) in [
            ("episodes.csv", &t.episodes),
            ("eval.csv", &t.eval_episodes),
        ] {
            let path = dir.join(name);
            let file = fs::File::create(&path).map_err(|e| io(&path, e))?;
            write_episodes_csv(file, records).map_err(|e| io(&path, e))?;
        }
        for (ep, rows) in &t.traces {
            let path = dir.join(format!("trace_{ep}.csv"));
            let file = fs::File::create(&path).map_err(|e| io(&path, e))?;
            write_trace(file, rows).map_err(|e| io(&path, e))?;
        }
    }
    Ok(())
}
