use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use crate::oparl::RecordKind;

use super::config::parse_document;
use super::rundir::{
    read_metrics, CONFIG_ECHO_FILE, CURVES_FILE, DONE_FILE, METRICS_FILE, SUMMARY_CSV_FILE, SUMMARY_TXT_FILE,
};
use super::HarnessError;

/// Trailing window for learning-curve smoothing.
pub const SMOOTHING_WINDOW: usize = 10;

/// Final results and learning curve of one completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub env: String,
    pub variant: String,
    pub seed: u64,
    /// Last evaluation's mean return.
    pub final_return: f64,
    pub final_success: Option<f64>,
    /// `(step, episodic return)` per training episode.
    pub curve: Vec<(u64, f64)>,
}

/// Across-seed statistics for one (env, variant) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub env: String,
    pub variant: String,
    /// `(seed, final return)`, ordered by seed.
    pub per_seed: Vec<(u64, f64)>,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub std: f64,
    pub success_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub runs: Vec<RunSummary>,
    /// Ordered by env, then mean descending.
    pub cells: Vec<CellSummary>,
    /// Runs that were skipped, with the reason.
    pub warnings: Vec<String>,
}

pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Trailing moving average; early points average what is available.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

fn is_run_dir(dir: &Path) -> bool {
    [CONFIG_ECHO_FILE, METRICS_FILE, DONE_FILE]
        .iter()
        .any(|f| dir.join(f).is_file())
}

/// Run directories at or below each root, sorted and deduplicated.
pub fn discover_runs(roots: &[PathBuf]) -> Vec<PathBuf> {
    let mut found: Vec<PathBuf> = roots
        .iter()
        .flat_map(|root| {
            WalkDir::new(root)
                .sort_by_file_name()
                .into_iter()
                .filter_map(Result::ok)
                .filter(|e| e.file_type().is_dir() && is_run_dir(e.path()))
                .map(|e| e.into_path())
        })
        .collect();
    found.sort();
    found.dedup();
    found
}

/// Reads one completed run directory.
pub fn load_run(dir: &Path) -> Result<RunSummary, String> {
    if !dir.join(DONE_FILE).is_file() {
        return Err("incomplete run (no DONE marker)".into());
    }
    let echo_path = dir.join(CONFIG_ECHO_FILE);
    let echo = fs::read_to_string(&echo_path).map_err(|e| format!("{}: {e}", echo_path.display()))?;
    let kv: BTreeMap<String, String> = parse_document(&echo)
        .map_err(|e| format!("{}: {e}", echo_path.display()))?
        .into_iter()
        .collect();
    let get = |k: &str| {
        kv.get(k)
            .cloned()
            .ok_or_else(|| format!("{}: missing {k}", echo_path.display()))
    };
    let env = get("run.env")?;
    let variant = get("oparl.variant")?;
    let seed = get("run.seed")?
        .parse()
        .map_err(|e| format!("{}: run.seed: {e}", echo_path.display()))?;
    let records = read_metrics(&dir.join(METRICS_FILE))?;
    let last_eval = records
        .iter()
        .rev()
        .find(|r| r.kind == RecordKind::Eval)
        .ok_or("metrics hold no evaluation record")?;
    let final_return = last_eval
        .eval_return_mean
        .filter(|v| v.is_finite())
        .ok_or("final evaluation has no finite return")?;
    let curve = records
        .iter()
        .filter(|r| r.kind == RecordKind::Episode)
        .filter_map(|r| r.episodic_return.map(|v| (r.step, v)))
        .collect();
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        env,
        variant,
        seed,
        final_return,
        final_success: last_eval.eval_success_rate,
        curve,
    })
}

/// Groups runs by (env, variant); within an env, higher means come first.
pub fn summarize(runs: &[RunSummary]) -> Vec<CellSummary> {
    let mut groups: BTreeMap<(String, String), Vec<&RunSummary>> = BTreeMap::new();
    for r in runs {
        groups.entry((r.env.clone(), r.variant.clone())).or_default().push(r);
    }
    let mut cells: Vec<CellSummary> = groups
        .into_iter()
        .map(|((env, variant), mut rs)| {
            rs.sort_by_key(|r| r.seed);
            let values: Vec<f64> = rs.iter().map(|r| r.final_return).collect();
            let successes: Vec<f64> = rs.iter().filter_map(|r| r.final_success).collect();
            CellSummary {
                env,
                variant,
                per_seed: rs.iter().map(|r| (r.seed, r.final_return)).collect(),
                mean: values.iter().sum::<f64>() / values.len() as f64,
                std: sample_std(&values),
                success_mean: (successes.len() == rs.len())
                    .then(|| successes.iter().sum::<f64>() / successes.len() as f64),
            }
        })
        .collect();
    cells.sort_by(|a, b| {
        a.env
            .cmp(&b.env)
            .then(b.mean.total_cmp(&a.mean))
            .then(a.variant.cmp(&b.variant))
    });
    cells
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn summary_csv(cells: &[CellSummary]) -> String {
    let mut s = String::from("env,variant,row,seed,n,final_return,std,success_rate\n");
    for c in cells {
        let _ = writeln!(
            s,
            "{},{},summary,,{},{},{},{}",
            c.env,
            c.variant,
            c.per_seed.len(),
            c.mean,
            c.std,
            opt(c.success_mean)
        );
        for (seed, v) in &c.per_seed {
            let _ = writeln!(s, "{},{},seed,{seed},1,{v},,", c.env, c.variant);
        }
    }
    s
}

fn summary_txt(cells: &[CellSummary], warnings: &[String]) -> String {
    let mut s = String::new();
    let mut env = "";
    for c in cells {
        if c.env != env {
            env = &c.env;
            let _ = writeln!(s, "{env}");
        }
        let seeds: Vec<String> = c.per_seed.iter().map(|(k, v)| format!("{k}:{v:.2}")).collect();
        let success = c.success_mean.map(|v| format!("  success {v:.2}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "  {:<14} {:>12.2} ± {:<10.2} (n={}){success}  [{}]",
            c.variant,
            c.mean,
            c.std,
            c.per_seed.len(),
            seeds.join(" ")
        );
    }
    for w in warnings {
        let _ = writeln!(s, "skipped: {w}");
    }
    s
}

fn curves_csv(runs: &[RunSummary]) -> String {
    let mut s = String::from("env,variant,seed,step,episodic_return,smoothed_return\n");
    for r in runs {
        let raw: Vec<f64> = r.curve.iter().map(|(_, v)| *v).collect();
        for ((step, v), sm) in r.curve.iter().zip(smooth(&raw, SMOOTHING_WINDOW)) {
            let _ = writeln!(s, "{},{},{},{step},{v},{sm}", r.env, r.variant, r.seed);
        }
    }
    s
}

/// Summarizes every run directory under `roots` into `out`
/// (`summary.csv`, `summary.txt`, `curves.csv`). Unreadable or incomplete
/// runs are skipped and listed in the warnings.
pub fn cmd_compare(roots: &[PathBuf], out: &Path) -> Result<CompareReport, HarnessError> {
    let mut runs = Vec::new();
    let mut warnings = Vec::new();
    for dir in discover_runs(roots) {
        match load_run(&dir) {
            Ok(r) => runs.push(r),
            Err(why) => warnings.push(format!("{}: {why}", dir.display())),
        }
    }
    if runs.is_empty() {
        return Err(HarnessError::Input(format!(
            "no completed runs found{}",
            if warnings.is_empty() {
                String::new()
            } else {
                format!(" ({})", warnings.join("; "))
            }
        )));
    }
    runs.sort_by(|a, b| (&a.env, &a.variant, a.seed).cmp(&(&b.env, &b.variant, b.seed)));
    let cells = summarize(&runs);
    fs::create_dir_all(out).map_err(HarnessError::io(out))?;
    for (name, body) in [
        (SUMMARY_CSV_FILE, summary_csv(&cells)),
        (SUMMARY_TXT_FILE, summary_txt(&cells, &warnings)),
        (CURVES_FILE, curves_csv(&runs)),
    ] {
        let path = out.join(name);
        fs::write(&path, body).map_err(HarnessError::io(&path))?;
    }
    Ok(CompareReport { runs, cells, warnings })
}
