use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hddpg_core::agents::Agent;
use hddpg_core::harness::{
    build_env, emit_results, evaluate_traced, parse_config_text, resolve_config, run_trials,
    selftest, thread_count, trial_seed, write_episodes_csv, EpisodeRecord, HarnessError, Metrics,
    RunConfig, RunSummary,
};
use hddpg_core::maze::{read_trace, write_trace, MazeMap, Point, TraceEvent, TraceRow};

#[derive(Parser)]
#[command(
    name = "hddpg",
    version,
    about = "Maze navigation experiments with DDPG, D4PG and HDDPG"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one or more seeded trials.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Print a progress line every N training episodes (0 disables).
        #[arg(long, default_value_t = 25)]
        progress: usize,
    },
    /// Run a saved agent greedily and write eval.csv.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Checkpoint directory written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Also write trace_<ep>.csv for the first N episodes.
        #[arg(long, default_value_t = 0)]
        trace: usize,
    },
    /// Summarize a per-step trace file.
    ReplayTrace {
        trace: PathBuf,
        /// Map to draw the path on: `paper`, `desk` or a map file.
        #[arg(long)]
        map: Option<String>,
        /// Characters per map cell in the drawing.
        #[arg(long, default_value_t = 4)]
        cell_chars: usize,
    },
    /// Gradient check, reward tables and the noise rule.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// ddpg, d4pg or hddpg.
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    scenario: Option<String>,
    /// `paper`, `desk` or a map file.
    #[arg(long)]
    map: Option<String>,
    /// Training episodes (`train`) or greedy episodes (`eval`).
    #[arg(long)]
    episodes: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// `paper` or `desk`.
    #[arg(long)]
    preset: Option<String>,
    /// File of `key = value` lines applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Additional `key=value` setting; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

/// Error that maps to exit status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: HarnessError) -> anyhow::Error {
    match e {
        HarnessError::Config(m) => UsageError(m).into(),
        other => other.into(),
    }
}

impl RunArgs {
    /// Resolves the layered configuration. `episodes` is routed to the
    /// given key so that `eval` can reuse the flag.
    fn resolve(&self, episodes_key: &str) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
                parse_config_text(&text).map_err(usage)?
            }
            None => Vec::new(),
        };
        let mut flags = Vec::new();
        for (key, value) in [
            ("preset", &self.preset),
            ("algo", &self.algo),
            ("scenario", &self.scenario),
            ("map", &self.map),
            (episodes_key, &self.episodes),
            ("trials", &self.trials),
            ("seed", &self.seed),
        ] {
            if let Some(v) = value {
                flags.push((key.to_string(), v.clone()));
            }
        }
        for s in &self.sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| UsageError(format!("--set expects KEY=VALUE, got {s:?}")))?;
            flags.push((k.trim().to_string(), v.trim().to_string()));
        }
        resolve_config(&file, &flags).map_err(usage)
    }
}

fn fmt_rate(m: &Metrics) -> String {
    match (m.success_rate, m.average_score) {
        (Some(sr), Some(avg)) => format!("SR {sr:.3} AS {avg:.1}"),
        _ => "no episodes".into(),
    }
}

fn train(run: &RunArgs, progress: usize) -> Result<()> {
    let config = run.resolve("episodes")?;
    eprintln!(
        "{} scenario {} on {}: {} trials x {} episodes, max {} steps (config {})",
        config.algo,
        config.scenario,
        config.map,
        config.trials,
        config.episodes,
        config.max_steps,
        &config.hash()[..12]
    );
    let report = |trial: usize, r: &EpisodeRecord| {
        if progress > 0 && (r.episode + 1) % progress == 0 {
            eprintln!(
                "trial {trial} episode {} success {} steps {} score {:.1} sigma {:.3}/{:.3}",
                r.episode + 1,
                r.success as u8,
                r.steps,
                r.score,
                r.sigma_low,
                r.sigma_high
            );
        }
    };
    let trials = run_trials(&config, thread_count(), Some(&run.out), Some(&report))?;
    for t in &trials {
        println!(
            "trial {} seed {}: train {}, eval {} ({:.0} s)",
            t.trial,
            t.seed,
            fmt_rate(&t.train),
            fmt_rate(&t.eval),
            t.wall_seconds
        );
    }
    let summary = RunSummary::new(&config, trials);
    emit_results(&summary, &run.out)?;
    if let (Some(sr), Some(avg)) = (
        summary.aggregate.eval_success_rate,
        summary.aggregate.eval_average_score,
    ) {
        println!("mean eval SR {sr:.3} AS {avg:.1}");
    }
    println!("results in {}", run.out.display());
    Ok(())
}

fn eval(run: &RunArgs, checkpoint: &Path, traced: usize) -> Result<()> {
    let config = run.resolve("eval_episodes")?;
    let mut agent =
        Agent::load(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let mut env = build_env(&config)?;
    let seed = trial_seed(config.seed, 0);
    let (records, traces) = evaluate_traced(
        &mut agent,
        &mut env,
        &config,
        seed,
        config.eval_episodes,
        traced,
    )?;
    println!("{}", fmt_rate(&Metrics::of(&records)));
    fs::create_dir_all(&run.out).with_context(|| run.out.display().to_string())?;
    let path = run.out.join("eval.csv");
    let file = fs::File::create(&path).with_context(|| path.display().to_string())?;
    write_episodes_csv(file, &records).with_context(|| path.display().to_string())?;
    for (ep, rows) in traces {
        let path = run.out.join(format!("trace_{ep}.csv"));
        let file = fs::File::create(&path).with_context(|| path.display().to_string())?;
        write_trace(file, &rows).with_context(|| path.display().to_string())?;
    }
    Ok(())
}

fn load_named_map(name: &str) -> Result<MazeMap> {
    let mut config = RunConfig::desk(hddpg_core::harness::Algorithm::Hddpg, 1);
    config.map = name.to_string();
    config.load_map().map_err(usage)
}

/// Draws walls (`#`), the path (`.`), subgoal hits (`o`), start (`S`) and the
/// final position (`G` on success, `X` on collision, `E` otherwise).
fn draw(map: &MazeMap, rows: &[TraceRow], cell_chars: usize) -> String {
    let k = cell_chars.max(1);
    let (w, h) = (map.width() * k, map.height() * k);
    let (sx, sy) = (
        2.0 * map.half_width() / w as f64,
        2.0 * map.half_height() / h as f64,
    );
    let mut grid: Vec<Vec<char>> = (0..h)
        .map(|r| {
            (0..w)
                .map(|c| {
                    let p = Point::new(
                        -map.half_width() + (c as f64 + 0.5) * sx,
                        map.half_height() - (r as f64 + 0.5) * sy,
                    );
                    match map.cell_of(p) {
                        Some((row, col)) if map.is_solid(row, col) => '#',
                        _ => ' ',
                    }
                })
                .collect()
        })
        .collect();
    let mut mark = |x: f64, y: f64, ch: char| {
        // points on the outer boundary belong to the last row/column
        let c = ((x + map.half_width()) / sx).floor().min(w as f64 - 1.0);
        let r = ((map.half_height() - y) / sy).floor().min(h as f64 - 1.0);
        if c >= 0.0 && r >= 0.0 {
            grid[r as usize][c as usize] = ch;
        }
    };
    for wall in map.walls() {
        let n = (wall.length() / (0.25 * sx.min(sy))).ceil() as usize;
        for i in 0..=n {
            let p = wall.a + (wall.b - wall.a) * (i as f64 / n.max(1) as f64);
            mark(p.x, p.y, '#');
        }
    }
    for row in rows {
        mark(
            row.x,
            row.y,
            if row.event == TraceEvent::Subgoal {
                'o'
            } else {
                '.'
            },
        );
    }
    if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
        mark(first.x, first.y, 'S');
        let end = match last.event {
            TraceEvent::Goal => 'G',
            TraceEvent::Collision => 'X',
            _ => 'E',
        };
        mark(last.x, last.y, end);
    }
    let border = format!("+{}+\n", "-".repeat(w));
    let mut out = border.clone();
    for line in grid {
        out.push('|');
        out.extend(line);
        out.push_str("|\n");
    }
    out.push_str(&border);
    out
}

fn replay_trace(path: &Path, map: Option<&str>, cell_chars: usize) -> Result<()> {
    let file = fs::File::open(path).with_context(|| path.display().to_string())?;
    let rows = read_trace(file).with_context(|| path.display().to_string())?;
    let Some(last) = rows.last() else {
        bail!(UsageError(format!("{}: no rows", path.display())));
    };
    let length: f64 = rows
        .windows(2)
        .map(|w| Point::new(w[0].x, w[0].y).distance(Point::new(w[1].x, w[1].y)))
        .sum();
    let count = |e: TraceEvent| rows.iter().filter(|r| r.event == e).count();
    println!("steps        {}", last.step);
    println!("path length  {length:.2} m");
    println!("start        ({:.2}, {:.2})", rows[0].x, rows[0].y);
    println!("end          ({:.2}, {:.2})", last.x, last.y);
    println!("subgoals     {}", count(TraceEvent::Subgoal));
    println!("outcome      {:?}", last.event);
    println!(
        "low reward   {:.1}",
        rows.iter().map(|r| r.reward_low).sum::<f64>()
    );
    println!(
        "flat reward  {:.1}",
        rows.iter().map(|r| r.reward_flat).sum::<f64>()
    );
    if let Some(name) = map {
        print!("{}", draw(&load_named_map(name)?, &rows, cell_chars));
    }
    Ok(())
}

fn run_selftest() -> Result<()> {
    let results = selftest::run_all();
    for r in &results {
        println!(
            "{} {}: {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        bail!("{failed} selftest suite(s) failed");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Train { run, progress } => train(run, *progress),
        Command::Eval {
            run,
            checkpoint,
            trace,
        } => eval(run, checkpoint, *trace),
        Command::ReplayTrace {
            trace,
            map,
            cell_chars,
        } => replay_trace(trace, map.as_deref(), *cell_chars),
        Command::Selftest => run_selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
