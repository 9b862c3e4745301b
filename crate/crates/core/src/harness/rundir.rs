use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::oparl::{MetricsSink, RunMetrics};

pub const CONFIG_ECHO_FILE: &str = "config.echo";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.final";
pub const DONE_FILE: &str = "DONE";
pub const SUMMARY_CSV_FILE: &str = "summary.csv";
pub const SUMMARY_TXT_FILE: &str = "summary.txt";
pub const CURVES_FILE: &str = "curves.csv";

/// Writes one JSON object per line.
pub struct JsonlSink<W: Write> {
    writer: W,
}

impl<W: Write> JsonlSink<W> {
    pub fn new(writer: W) -> Self {
        Self { writer }
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.writer.flush()
    }

    pub fn into_inner(self) -> W {
        self.writer
    }
}

impl<W: Write> MetricsSink for JsonlSink<W> {
    fn record(&mut self, m: &RunMetrics) -> io::Result<()> {
        serde_json::to_writer(&mut self.writer, m)?;
        self.writer.write_all(b"\n")
    }
}

/// Parses a metrics stream; the first bad line is reported by number.
pub fn read_metrics(path: &Path) -> Result<Vec<RunMetrics>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("{} line {}: {e}", path.display(), i + 1)))
        .collect()
}
