use std::path::PathBuf;

use rayon::prelude::*;

use crate::envs::EnvKind;
use crate::oparl::Variant;

use super::compare::{cmd_compare, CompareReport};
use super::rundir::DONE_FILE;
use super::train::cmd_train;
use super::{HarnessError, RunConfig, EXIT_OK, EXIT_PARTIAL_SWEEP};

/// An env x variant x seed matrix sharing one base configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepMatrix {
    pub envs: Vec<EnvKind>,
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub base: RunConfig,
}

#[derive(Debug, Clone)]
pub struct CellFailure {
    pub dir: PathBuf,
    pub error: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub ran: usize,
    /// Cells whose `DONE` marker already existed.
    pub skipped: usize,
    pub failures: Vec<CellFailure>,
    pub compare: Option<CompareReport>,
}

impl SweepOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            EXIT_OK
        } else {
            EXIT_PARTIAL_SWEEP
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, HarnessError>
where
    T::Err: std::fmt::Display,
{
    let items = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|e| HarnessError::Config(format!("{key}: invalid entry {s:?}: {e}")))
        })
        .collect::<Result<Vec<T>, _>>()?;
    if items.is_empty() {
        return Err(HarnessError::Config(format!("{key}: empty list")));
    }
    Ok(items)
}

/// `a,b,c` or a half-open range `lo..hi`.
fn parse_seeds(value: &str) -> Result<Vec<u64>, HarnessError> {
    if let Some((lo, hi)) = value.split_once("..") {
        let lo: u64 = lo
            .trim()
            .parse()
            .map_err(|e| HarnessError::Config(format!("sweep.seeds: {e}")))?;
        let hi: u64 = hi
            .trim()
            .parse()
            .map_err(|e| HarnessError::Config(format!("sweep.seeds: {e}")))?;
        if lo >= hi {
            return Err(HarnessError::Config("sweep.seeds: empty range".into()));
        }
        return Ok((lo..hi).collect());
    }
    parse_list("sweep.seeds", value)
}

impl SweepMatrix {
    /// `sweep.envs`, `sweep.variants` and `sweep.seeds` select the matrix;
    /// each defaults to the base run's single value. Every other key
    /// configures the base run, whose `run.out` is the sweep root.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self, HarnessError> {
        let (mut envs, mut variants, mut seeds) = (None, None, None);
        let mut rest = Vec::new();
        for (k, v) in pairs {
            match k {
                "sweep.envs" => envs = Some(parse_list(k, v)?),
                "sweep.variants" => variants = Some(parse_list(k, v)?),
                "sweep.seeds" => seeds = Some(parse_seeds(v)?),
                _ => rest.push((k, v)),
            }
        }
        let base = RunConfig::from_pairs(rest)?;
        Ok(Self {
            envs: envs.unwrap_or_else(|| vec![base.env]),
            variants: variants.unwrap_or_else(|| vec![base.oparl.variant]),
            seeds: seeds.unwrap_or_else(|| vec![base.seed]),
            base,
        })
    }

    pub fn root(&self) -> &PathBuf {
        &self.base.out
    }

    /// One resolved configuration per cell, in `<root>/<env>/<variant>/seed-<n>`.
    pub fn cells(&self) -> Result<Vec<RunConfig>, HarnessError> {
        let mut cells = Vec::new();
        for &env in &self.envs {
            for &variant in &self.variants {
                for &seed in &self.seeds {
                    let mut cfg = self.base.clone();
                    cfg.env = env;
                    cfg.oparl.variant = variant;
                    cfg.seed = seed;
                    cfg.out = self
                        .base
                        .out
                        .join(env.name())
                        .join(variant.name())
                        .join(format!("seed-{seed}"));
                    cells.push(cfg.resolved()?);
                }
            }
        }
        Ok(cells)
    }
}

/// Runs every cell not already marked complete, in parallel, then compares
/// all runs under the sweep root. Failed cells are reported, not fatal.
pub fn cmd_sweep(matrix: &SweepMatrix) -> Result<SweepOutcome, HarnessError> {
    let cells = matrix.cells()?;
    let results: Vec<Option<Result<(), CellFailure>>> = cells
        .par_iter()
        .map(|cfg| {
            if cfg.out.join(DONE_FILE).is_file() {
                return None;
            }
            Some(cmd_train(cfg).map(|_| ()).map_err(|e| CellFailure {
                dir: cfg.out.clone(),
                exit_code: e.exit_code(),
                error: e.to_string(),
            }))
        })
        .collect();
    let skipped = results.iter().filter(|r| r.is_none()).count();
    let mut ran = 0;
    let mut failures = Vec::new();
    for r in results.into_iter().flatten() {
        match r {
            Ok(()) => ran += 1,
            Err(f) => failures.push(f),
        }
    }
    let compare = match cmd_compare(std::slice::from_ref(matrix.root()), matrix.root()) {
        Ok(report) => Some(report),
        Err(_) if !failures.is_empty() => None,
        Err(e) => return Err(e),
    };
    Ok(SweepOutcome {
        ran,
        skipped,
        failures,
        compare,
    })
}
