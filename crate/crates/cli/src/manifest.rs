//! Run manifests.
//!
//! A manifest sits next to every output as `<output>.manifest`. It is a plain
//! `key = value` file: the command, the version, the master seed, the working
//! directory, the full argument vector (one `arg = ...` line each, in order),
//! a config echo and per-phase timings. Replaying the argument vector from the
//! recorded directory reproduces the output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, Context};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub cwd: PathBuf,
    pub args: Vec<String>,
    pub config: Vec<(String, String)>,
    pub timings_ms: Vec<(String, f64)>,
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>) -> Self {
        RunManifest {
            command: command.to_string(),
            version: format!("continest {}", env!("CARGO_PKG_VERSION")),
            seed: None,
            cwd: std::env::current_dir().unwrap_or_default(),
            args,
            config: Vec::new(),
            timings_ms: Vec::new(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.to_string(), value.to_string()));
    }

    pub fn timing(&mut self, phase: &str, elapsed: Duration) {
        self.timings_ms.push((phase.to_string(), elapsed.as_secs_f64() * 1e3));
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command = {}", self.command);
        let _ = writeln!(out, "version = {}", self.version);
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed = {seed}");
        }
        let _ = writeln!(out, "cwd = {}", self.cwd.display());
        for a in &self.args {
            let _ = writeln!(out, "arg = {a}");
        }
        for (k, v) in &self.config {
            let _ = writeln!(out, "config.{k} = {v}");
        }
        for (k, v) in &self.timings_ms {
            let _ = writeln!(out, "timing.{k}_ms = {v:.3}");
        }
        out
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut m = RunManifest::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once(" = ")
                .ok_or_else(|| anyhow!("manifest line {}: expected `key = value`", i + 1))?;
            match key {
                "command" => m.command = value.to_string(),
                "version" => m.version = value.to_string(),
                "seed" => m.seed = Some(value.parse().context("bad seed")?),
                "cwd" => m.cwd = PathBuf::from(value),
                "arg" => m.args.push(value.to_string()),
                k => {
                    if let Some(k) = k.strip_prefix("config.") {
                        m.config.push((k.to_string(), value.to_string()));
                    } else if let Some(k) = k.strip_prefix("timing.") {
                        let k = k.strip_suffix("_ms").unwrap_or(k);
                        m.timings_ms.push((k.to_string(), value.parse().context("bad timing")?));
                    }
                }
            }
        }
        if m.command.is_empty() || m.args.is_empty() {
            return Err(anyhow!("manifest lacks a command or arguments"));
        }
        Ok(m)
    }

    pub fn write_for(&self, output: &Path) -> anyhow::Result<()> {
        let path = manifest_path(output);
        fs::write(&path, self.to_text()).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text)
    }
}
