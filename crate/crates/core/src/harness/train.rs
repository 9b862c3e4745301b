use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use crate::oparl::{EvalReport, Trainer};

use super::rundir::{JsonlSink, CHECKPOINT_FILE, CONFIG_ECHO_FILE, DONE_FILE, METRICS_FILE};
use super::{HarnessError, RunConfig};

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub dir: PathBuf,
    pub steps: u64,
    pub final_eval: Option<EvalReport>,
}

/// Runs one seeded training run into `cfg.out`: `config.echo`, the metrics
/// stream, the final checkpoint and finally the `DONE` marker.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome, HarnessError> {
    let cfg = cfg.clone().resolved()?;
    let dir = cfg.out.clone();
    fs::create_dir_all(&dir).map_err(HarnessError::io(&dir))?;
    let done = dir.join(DONE_FILE);
    if done.exists() {
        fs::remove_file(&done).map_err(HarnessError::io(&done))?;
    }
    let echo = dir.join(CONFIG_ECHO_FILE);
    fs::write(&echo, cfg.echo()).map_err(HarnessError::io(&echo))?;

    let mut trainer = Trainer::new(cfg.env, cfg.oparl.clone(), cfg.settings())?;
    let metrics = dir.join(METRICS_FILE);
    let file = File::create(&metrics).map_err(HarnessError::io(&metrics))?;
    let mut sink = JsonlSink::new(BufWriter::new(file));
    let result = trainer.run(&mut sink);
    // keep the records written before an abort
    sink.flush().map_err(HarnessError::io(&metrics))?;
    result?;

    let ckpt = dir.join(CHECKPOINT_FILE);
    let json = trainer.checkpoint(cfg.to_kv()).to_json()?;
    fs::write(&ckpt, json).map_err(HarnessError::io(&ckpt))?;
    fs::write(&done, format!("steps={}\n", trainer.state().env_steps)).map_err(HarnessError::io(&done))?;
    Ok(TrainOutcome {
        dir,
        steps: trainer.state().env_steps,
        final_eval: trainer.last_eval().cloned(),
    })
}
