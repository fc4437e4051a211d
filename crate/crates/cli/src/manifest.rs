use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Record of one invocation, written next to its outputs as `manifest.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    /// Arguments after the program name; `game replay` re-parses these.
    pub args: Vec<String>,
    pub threads: usize,
    pub seed: Option<u64>,
    /// Every effective setting, defaults included.
    pub config: Value,
    pub inputs: Value,
    pub outputs: Vec<String>,
    pub duration_secs: f64,
    #[serde(skip)]
    started: Option<Instant>,
}

impl Manifest {
    pub fn start(command: &str, args: Vec<String>, threads: usize) -> Self {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            args,
            threads,
            seed: None,
            config: Value::Null,
            inputs: Value::Null,
            outputs: Vec::new(),
            duration_secs: 0.0,
            started: Some(Instant::now()),
        }
    }

    pub fn config(&mut self, v: Value) {
        self.config = v;
    }

    pub fn inputs(&mut self, v: Value) {
        self.inputs = v;
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.display().to_string());
    }

    pub fn finish(mut self, dir: &Path) -> game_core::Result<()> {
        if let Some(t) = self.started {
            self.duration_secs = t.elapsed().as_secs_f64();
        }
        game_core::io::write_json(dir.join("manifest.json"), &self)
    }
}
