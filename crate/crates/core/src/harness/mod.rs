//! Command layer: flat key/value run configuration, run directories,
//! seeded training runs, checkpoint evaluation, multi-run comparison and
//! parallel sweeps.

mod compare;
mod config;
mod eval;
mod rundir;
mod sweep;
mod train;

pub use compare::{
    cmd_compare, discover_runs, load_run, sample_std, smooth, summarize, CellSummary, CompareReport,
    RunSummary, SMOOTHING_WINDOW,
};
pub use config::{parse_document, RunConfig};
pub use eval::{cmd_eval, format_eval};
pub use rundir::{
    read_metrics, JsonlSink, CHECKPOINT_FILE, CONFIG_ECHO_FILE, CURVES_FILE, DONE_FILE, METRICS_FILE,
    SUMMARY_CSV_FILE, SUMMARY_TXT_FILE,
};
pub use sweep::{cmd_sweep, CellFailure, SweepMatrix, SweepOutcome};
pub use train::{cmd_train, TrainOutcome};

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::oparl::OparlError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_PARTIAL_SWEEP: i32 = 4;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric abort: {0}")]
    Numeric(OparlError),
    #[error(transparent)]
    Run(OparlError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Input(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => EXIT_CONFIG,
            HarnessError::Numeric(_) => EXIT_NUMERIC,
            _ => EXIT_FAILURE,
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
        move |source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<OparlError> for HarnessError {
    fn from(e: OparlError) -> Self {
        match e {
            OparlError::Config(msg) => HarnessError::Config(msg),
            e if e.is_numeric() => HarnessError::Numeric(e),
            e => HarnessError::Run(e),
        }
    }
}
