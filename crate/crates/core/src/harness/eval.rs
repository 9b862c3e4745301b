use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::envs::EnvKind;
use crate::oparl::{evaluate, Checkpoint, EvalReport};

use super::HarnessError;

/// Evaluates a checkpoint's evaluation actor on fresh seeded episodes.
pub fn cmd_eval(checkpoint: &Path, episodes: usize, seed: u64) -> Result<EvalReport, HarnessError> {
    if episodes == 0 {
        return Err(HarnessError::Config("episodes: must be at least 1".into()));
    }
    let text = fs::read_to_string(checkpoint).map_err(HarnessError::io(checkpoint))?;
    let ckpt = Checkpoint::from_json(&text).map_err(|e| HarnessError::Input(e.to_string()))?;
    let kind: EnvKind = ckpt
        .env
        .parse()
        .map_err(|e| HarnessError::Input(format!("checkpoint environment: {e}")))?;
    let mut env = kind.make();
    let actor = ckpt
        .evaluation_actor(env.spec())
        .map_err(|e| HarnessError::Input(e.to_string()))?;
    Ok(evaluate(env.as_mut(), &actor, episodes, seed)?)
}

/// Per-episode returns followed by `mean ± std` (sample std).
pub fn format_eval(report: &EvalReport) -> String {
    let mut s = String::new();
    for (i, (r, ok)) in report.returns.iter().zip(&report.successes).enumerate() {
        let _ = writeln!(s, "episode {i}: return {r:.4}{}", if *ok { " (goal)" } else { "" });
    }
    let _ = writeln!(
        s,
        "mean {:.4} ± {:.4} over {} episodes, success rate {:.2}",
        report.mean(),
        report.std(),
        report.returns.len(),
        report.success_rate()
    );
    s
}
