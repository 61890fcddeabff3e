//! Run manifests and flag/config resolution.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::io::sha256_file;

/// Resolves settings with precedence flag > JSON config > default and
/// records every resolved value for the manifest.
#[derive(Debug, Default)]
pub struct Settings {
    config: Map<String, Value>,
    resolved: Map<String, Value>,
}

impl Settings {
    pub fn load(config: Option<&Path>) -> Result<Self> {
        let config = match config {
            None => Map::new(),
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
                match serde_json::from_str(&text).with_context(|| format!("config {} is not valid JSON", p.display()))? {
                    Value::Object(m) => m,
                    _ => anyhow::bail!("config {} must be a JSON object", p.display()),
                }
            }
        };
        Ok(Settings { config, resolved: Map::new() })
    }

    /// `key` uses the long flag name (`noise-std`); `noise_std` is accepted in the config too.
    pub fn get<T: Serialize + DeserializeOwned>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let value = match flag {
            Some(v) => v,
            None => match self.config.get(key).or_else(|| self.config.get(&key.replace('-', "_"))) {
                Some(v) => serde_json::from_value(v.clone()).with_context(|| format!("config key `{key}` has the wrong type"))?,
                None => default,
            },
        };
        self.resolved.insert(key.to_string(), serde_json::to_value(&value)?);
        Ok(value)
    }

    pub fn get_opt<T: Serialize + DeserializeOwned>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        self.get(key, flag.map(Some), None)
    }

    /// Boolean switches: set by the flag, otherwise by the config.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool> {
        self.get(key, flag.then_some(true), false)
    }

    pub fn record(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.resolved.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub command: String,
    pub flags: Map<String, Value>,
    pub input_digests: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub metrics: Map<String, Value>,
    pub wall_time_s: f64,
}

/// Collects a command's inputs, outputs and metrics, then writes `manifest.json`.
pub struct Recorder {
    command: String,
    start: Instant,
    inputs: BTreeMap<String, String>,
    outputs: Vec<PathBuf>,
    metrics: Map<String, Value>,
}

impl Recorder {
    pub fn new(command: &str) -> Self {
        Recorder {
            command: command.to_string(),
            start: Instant::now(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            metrics: Map::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    pub fn metric(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.metrics.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn finish(self, dir: &Path, settings: Settings) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let mut outputs: Vec<String> = self.outputs.iter().map(|p| p.display().to_string()).collect();
        outputs.push(path.display().to_string());
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            flags: settings.resolved,
            input_digests: self.inputs,
            outputs,
            metrics: self.metrics,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        };
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}
