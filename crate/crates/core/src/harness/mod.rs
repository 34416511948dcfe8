//! Configuration, run directories and the four commands behind the CLI.
//!
//! A run directory holds one subdirectory per command:
//!
//! ```text
//! RUN/train/     config.txt resolved.txt rewards.csv manifest.json
//!                checkpoints/ep_NNNNNN.vswq checkpoints/replay.vswr
//!                trajectories/ep_NNNNNN.csv
//! RUN/eval/      summary.csv start_X.XX.csv ...
//! RUN/fields/    snap_TTTTTTTT.vswm ... warm_start.vswf
//! RUN/validate/  report.csv
//! ```
//!
//! Every subdirectory also gets the config echo and a manifest.

pub mod commands;
pub mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub use commands::{
    cmd_eval, cmd_fields, cmd_train, cmd_validate, cost_banner, latest_checkpoint, parse_sweep, FieldsOptions,
};
pub use config::{RunConfig, KEYS};

use crate::error::{Error, Result};
use crate::lbm::snapshot::write_atomic;

/// One command's output directory.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: PathBuf) -> Result<Self> {
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(RunDir { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn subdir(&self, rel: &str) -> Result<PathBuf> {
        let p = self.path(rel);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    /// Atomic write of `rel` inside the directory.
    pub fn write(&self, rel: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.path(rel), bytes)
    }

    /// Echo of the config as given and with every key resolved.
    pub fn echo_config(&self, cfg: &RunConfig) -> Result<()> {
        self.write("config.txt", cfg.source.as_bytes())?;
        self.write("resolved.txt", cfg.resolved().as_bytes())
    }

    /// Files under the directory, relative, sorted, without the manifest.
    pub fn artifacts(&self) -> Result<Vec<String>> {
        fn walk(dir: &Path, base: &Path, out: &mut Vec<String>) -> Result<()> {
            for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
                let p = entry.map_err(|e| Error::io(dir, e))?.path();
                if p.is_dir() {
                    walk(&p, base, out)?;
                } else if let Ok(rel) = p.strip_prefix(base) {
                    let rel = rel.to_string_lossy().replace('\\', "/");
                    if rel != "manifest.json" && !rel.ends_with(".partial") {
                        out.push(rel);
                    }
                }
            }
            Ok(())
        }
        let mut out = Vec::new();
        walk(&self.root, &self.root, &mut out)?;
        out.sort();
        Ok(out)
    }
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// Provenance record written last, atomically.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub build: String,
    pub started: f64,
    pub finished: f64,
    pub artifacts: Vec<String>,
}

pub fn build_id() -> String {
    let profile = if cfg!(debug_assertions) { "debug" } else { "optimized" };
    format!("{} {} ({profile})", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

impl RunManifest {
    pub fn begin(command: &str, cfg: &RunConfig) -> Result<Self> {
        Ok(RunManifest {
            command: command.into(),
            config_hash: cfg.hash(),
            seed: cfg.seed()?,
            build: build_id(),
            started: unix_now(),
            finished: 0.0,
            artifacts: Vec::new(),
        })
    }

    pub fn to_json(&self) -> String {
        let v = serde_json::json!({
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "build": self.build,
            "started_unix": self.started,
            "finished_unix": self.finished,
            "artifacts": self.artifacts,
        });
        serde_json::to_string_pretty(&v).expect("manifest serializes") + "\n"
    }

    /// Stamps the end time, lists the directory and writes `manifest.json`.
    pub fn finish(mut self, dir: &RunDir) -> Result<Self> {
        self.finished = unix_now();
        self.artifacts = dir.artifacts()?;
        dir.write("manifest.json", self.to_json().as_bytes())?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_files_and_parses_back() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = RunDir::create(tmp.path().join("x")).unwrap();
        dir.subdir("checkpoints").unwrap();
        dir.write("checkpoints/a.bin", b"1").unwrap();
        dir.write("rewards.csv", b"h\n").unwrap();
        let cfg = RunConfig::parse("run.seed = 5").unwrap();
        let m = RunManifest::begin("train", &cfg).unwrap().finish(&dir).unwrap();
        assert_eq!(m.artifacts, vec!["checkpoints/a.bin", "rewards.csv"]);
        let text = fs::read_to_string(dir.path("manifest.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["seed"], 5);
        assert_eq!(v["config_hash"], cfg.hash());
        assert!(v["finished_unix"].as_f64().unwrap() >= v["started_unix"].as_f64().unwrap());
    }
}
