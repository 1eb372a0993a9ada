//! Output collection, manifests and quarantine.
//!
//! Commands add files to an [`Outputs`] collector instead of writing them
//! directly. On success the files, a `run.conf` that reproduces the run and a
//! `manifest.json` are written to the output directory. On failure whatever
//! was produced goes to `<output>/quarantine/` next to an `error.txt`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST: &str = "manifest.json";
pub const RUN_CONF: &str = "run.conf";
pub const QUARANTINE: &str = "quarantine";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
struct FileEntry {
    file: String,
    bytes: usize,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct InputEntry {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    reproduce: String,
    config: BTreeMap<&'static str, String>,
    inputs: Vec<InputEntry>,
    outputs: Vec<FileEntry>,
}

#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
    inputs: Vec<InputEntry>,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), contents.into()));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.add(name, text);
        Ok(())
    }

    /// Records the hash of an input file in the manifest.
    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(InputEntry {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    fn write_files(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, contents) in &self.files {
            let path = dir.join(name);
            fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }

    /// Writes outputs, `run.conf` and the manifest.
    pub fn commit(mut self, command: &str, config: &RunConfig) -> Result<()> {
        let dir = &config.output;
        let conf = config.to_conf();
        self.add(RUN_CONF, conf);
        let manifest = Manifest {
            tool: "epispline",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: config.seed,
            reproduce: format!("epispline {command} --config {RUN_CONF} --output <dir>"),
            config: config.entries().into_iter().collect(),
            inputs: std::mem::take(&mut self.inputs),
            outputs: self
                .files
                .iter()
                .map(|(name, contents)| FileEntry {
                    file: name.clone(),
                    bytes: contents.len(),
                    sha256: sha256_hex(contents),
                })
                .collect(),
        };
        self.add_json(MANIFEST, &manifest)?;
        self.write_files(dir)
    }

    /// Writes whatever was produced, plus the error, under `quarantine/`.
    pub fn quarantine(self, config: &RunConfig, error: &anyhow::Error) -> Result<()> {
        let dir = config.output.join(QUARANTINE);
        self.write_files(&dir)?;
        fs::write(dir.join("error.txt"), format!("{error:#}\n"))?;
        fs::write(dir.join(RUN_CONF), config.to_conf())?;
        Ok(())
    }
}
