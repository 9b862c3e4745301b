use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use oparl::harness::{
    cmd_compare, cmd_eval, cmd_sweep, cmd_train, format_eval, parse_document, HarnessError, RunConfig,
    SweepMatrix, EXIT_FAILURE,
};

#[derive(Parser)]
#[command(name = "oparl", version, about = "Dual-actor off-policy RL with an ensemble critic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one seeded run.
    Train(RunFlags),
    /// Evaluate a checkpoint's evaluation actor.
    Eval {
        /// Path to a `checkpoint.final` file or a run directory holding one.
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Summarize completed runs found under the given directories.
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an env x variant x seed matrix; `--env`, `--variant` and `--seed`
    /// take comma-separated lists (seeds also `lo..hi`).
    Sweep(RunFlags),
}

#[derive(Args)]
struct RunFlags {
    /// Flat key=value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    reset_interval: Option<u64>,
    #[arg(long)]
    reset_direction: Option<String>,
    #[arg(long)]
    ensemble_size: Option<usize>,
    #[arg(long)]
    candidates: Option<usize>,
    #[arg(long)]
    criterion: Option<String>,
    /// Any other config key, as key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl RunFlags {
    /// Config-file pairs followed by flag overrides.
    fn pairs(&self, sweep: bool) -> Result<Vec<(String, String)>, HarnessError> {
        let mut pairs = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
                    path: path.clone(),
                    source,
                })?;
                parse_document(&text)?
            }
            None => Vec::new(),
        };
        let (env_key, variant_key, seed_key) = if sweep {
            ("sweep.envs", "sweep.variants", "sweep.seeds")
        } else {
            ("run.env", "oparl.variant", "run.seed")
        };
        let flags = [
            (env_key, self.env.clone()),
            (variant_key, self.variant.clone()),
            ("run.total_steps", self.steps.map(|v| v.to_string())),
            (seed_key, self.seed.clone()),
            ("run.out", self.out.as_ref().map(|p| p.to_string_lossy().into_owned())),
            ("oparl.reset_interval", self.reset_interval.map(|v| v.to_string())),
            ("oparl.reset_direction", self.reset_direction.clone()),
            ("oparl.ensemble_size", self.ensemble_size.map(|v| v.to_string())),
            ("oparl.candidate_count", self.candidates.map(|v| v.to_string())),
            ("oparl.selection_criterion", self.criterion.clone()),
        ];
        for s in &self.sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("--set expects KEY=VALUE, got {s:?}")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        pairs.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
        Ok(pairs)
    }
}

fn as_refs(pairs: &[(String, String)]) -> impl Iterator<Item = (&str, &str)> {
    pairs.iter().map(|(k, v)| (k.as_str(), v.as_str()))
}

fn train(flags: &RunFlags) -> Result<i32, HarnessError> {
    let cfg = RunConfig::from_pairs(as_refs(&flags.pairs(false)?))?;
    let outcome = cmd_train(&cfg)?;
    match &outcome.final_eval {
        Some(r) => println!(
            "{} steps done in {}: final eval {:.4} ± {:.4} (success rate {:.2})",
            outcome.steps,
            outcome.dir.display(),
            r.mean(),
            r.std(),
            r.success_rate()
        ),
        None => println!("{} steps done in {}", outcome.steps, outcome.dir.display()),
    }
    Ok(0)
}

fn eval(checkpoint: &Path, episodes: usize, seed: u64) -> Result<i32, HarnessError> {
    let path = if checkpoint.is_dir() {
        checkpoint.join(oparl::harness::CHECKPOINT_FILE)
    } else {
        checkpoint.to_path_buf()
    };
    let report = cmd_eval(&path, episodes, seed)?;
    print!("{}", format_eval(&report));
    Ok(0)
}

fn compare(runs: &[PathBuf], out: &Path) -> Result<i32, HarnessError> {
    let report = cmd_compare(runs, out)?;
    for w in &report.warnings {
        eprintln!("warning: skipped {w}");
    }
    let text = std::fs::read_to_string(out.join(oparl::harness::SUMMARY_TXT_FILE)).unwrap_or_default();
    print!("{text}");
    Ok(0)
}

fn sweep(flags: &RunFlags) -> Result<i32, HarnessError> {
    let matrix = SweepMatrix::from_pairs(as_refs(&flags.pairs(true)?))?;
    let outcome = cmd_sweep(&matrix)?;
    println!(
        "sweep: {} ran, {} already complete, {} failed",
        outcome.ran,
        outcome.skipped,
        outcome.failures.len()
    );
    for f in &outcome.failures {
        eprintln!("cell {} failed (exit {}): {}", f.dir.display(), f.exit_code, f.error);
    }
    if let Some(report) = &outcome.compare {
        for w in &report.warnings {
            eprintln!("warning: skipped {w}");
        }
        let summary = matrix.root().join(oparl::harness::SUMMARY_TXT_FILE);
        print!("{}", std::fs::read_to_string(summary).unwrap_or_default());
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(flags) => train(flags),
        Command::Eval {
            checkpoint,
            episodes,
            seed,
        } => eval(checkpoint, *episodes, *seed),
        Command::Compare { runs, out } => compare(runs, out),
        Command::Sweep(flags) => sweep(flags),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(EXIT_FAILURE as u8))
        }
    }
}
