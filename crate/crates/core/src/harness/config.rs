use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::envs::EnvKind;
use crate::oparl::{OparlConfig, RunSettings};

use super::HarnessError;

/// Everything needed to reproduce one run. Serialized as flat dotted
/// `key=value` lines (`run.*` and `oparl.*`).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvKind,
    pub oparl: OparlConfig,
    pub total_steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = RunSettings::default();
        Self {
            env: EnvKind::PointMass,
            oparl: OparlConfig::desk(),
            total_steps: s.total_steps,
            eval_interval: s.eval_interval,
            eval_episodes: s.eval_episodes,
            seed: s.seed,
            out: PathBuf::from("runs/latest"),
        }
    }
}

/// Splits a config document into `(key, value)` pairs. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_document(text: &str) -> Result<Vec<(String, String)>, HarnessError> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            HarnessError::Config(format!("line {}: expected key=value, got {line:?}", i + 1))
        })?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, HarnessError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| HarnessError::Config(format!("{key}: invalid value {value:?}: {e}")))
}

impl RunConfig {
    pub fn settings(&self) -> RunSettings {
        RunSettings {
            total_steps: self.total_steps,
            eval_interval: self.eval_interval,
            eval_episodes: self.eval_episodes,
            seed: self.seed,
        }
    }

    /// Sets one dotted key. Unknown keys are rejected by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        match key {
            "run.env" => self.env = parse(key, value)?,
            "run.total_steps" => self.total_steps = parse(key, value)?,
            "run.eval_interval" => self.eval_interval = parse(key, value)?,
            "run.eval_episodes" => self.eval_episodes = parse(key, value)?,
            "run.seed" => self.seed = parse(key, value)?,
            "run.out" => self.out = PathBuf::from(value),
            _ => {
                let field = key
                    .strip_prefix("oparl.")
                    .ok_or_else(|| HarnessError::Config(format!("unknown key {key:?}")))?;
                self.oparl.set(field, value).map_err(|e| match e {
                    None => HarnessError::Config(format!("unknown key {key:?}")),
                    Some(msg) => HarnessError::Config(format!("{key}: invalid value {value:?}: {msg}")),
                })?;
            }
        }
        Ok(())
    }

    /// Applies variant rules and checks every field.
    pub fn resolved(mut self) -> Result<Self, HarnessError> {
        self.oparl = self.oparl.resolved()?;
        if self.total_steps == 0 {
            return Err(HarnessError::Config("run.total_steps: must be positive".into()));
        }
        if self.eval_interval == 0 {
            return Err(HarnessError::Config("run.eval_interval: must be positive".into()));
        }
        if self.eval_episodes == 0 {
            return Err(HarnessError::Config("run.eval_episodes: must be positive".into()));
        }
        Ok(self)
    }

    /// Defaults, then `pairs` in order (later pairs win), then resolution.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self, HarnessError> {
        let mut cfg = Self::default();
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        cfg.resolved()
    }

    /// Reads an optional config file and applies `overrides` on top of it.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, HarnessError> {
        let mut pairs = match file {
            Some(path) => parse_document(&fs::read_to_string(path).map_err(HarnessError::io(path))?)?,
            None => Vec::new(),
        };
        pairs.extend(overrides.iter().cloned());
        Self::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let mut kv = self.oparl.to_kv();
        for (k, v) in [
            ("run.env", self.env.name().to_string()),
            ("run.total_steps", self.total_steps.to_string()),
            ("run.eval_interval", self.eval_interval.to_string()),
            ("run.eval_episodes", self.eval_episodes.to_string()),
            ("run.seed", self.seed.to_string()),
            ("run.out", self.out.to_string_lossy().into_owned()),
        ] {
            kv.insert(k.to_string(), v);
        }
        kv
    }

    /// The resolved configuration as a config document, one key per line.
    pub fn echo(&self) -> String {
        self.to_kv().iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}
