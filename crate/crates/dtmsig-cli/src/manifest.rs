//! Run manifests: resolved parameters, input content digests, artifact
//! paths and wall-clock timing for every CLI invocation.
//!
//! Reports embed only the `run_id`, a digest of subcommand + parameters +
//! input hashes. Timings live in the manifest file alone, so re-running
//! with identical inputs and parameters reproduces reports byte-for-byte.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

pub struct RunManifest {
    subcommand: String,
    params: BTreeMap<String, String>,
    inputs: BTreeMap<String, InputDigest>,
    artifacts: Vec<String>,
    started: Instant,
}

#[derive(Serialize)]
struct ManifestFile<'a> {
    run_id: String,
    subcommand: &'a str,
    params: &'a BTreeMap<String, String>,
    inputs: &'a BTreeMap<String, InputDigest>,
    artifacts: &'a [String],
    wall_clock_ms: u128,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            params: BTreeMap::new(),
            inputs: BTreeMap::new(),
            artifacts: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(mut self, key: &str, path: &Path) -> dtmsig::Result<Self> {
        let bytes = std::fs::read(path)?;
        let digest = hex(&Sha256::digest(&bytes));
        self.inputs.insert(
            key.to_string(),
            InputDigest {
                path: path.display().to_string(),
                sha256: digest,
            },
        );
        Ok(self)
    }

    pub fn artifact(mut self, path: &Path) -> Self {
        self.artifacts.push(path.display().to_string());
        self
    }

    /// Deterministic identifier of this run: digest of the subcommand, the
    /// resolved parameters and the input content hashes (never timings).
    pub fn run_id(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.subcommand.as_bytes());
        for (k, v) in &self.params {
            hasher.update(b"\x1f");
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
        }
        for (k, input) in &self.inputs {
            hasher.update(b"\x1e");
            hasher.update(k.as_bytes());
            hasher.update(b":");
            hasher.update(input.sha256.as_bytes());
        }
        hex(&hasher.finalize())[..16].to_string()
    }

    fn render(&self) -> String {
        let file = ManifestFile {
            run_id: self.run_id(),
            subcommand: &self.subcommand,
            params: &self.params,
            inputs: &self.inputs,
            artifacts: &self.artifacts,
            wall_clock_ms: self.started.elapsed().as_millis(),
        };
        serde_json::to_string_pretty(&file).expect("manifest serializes")
    }

    /// Write `<stem>.manifest.json` next to an artifact stem.
    pub fn write_alongside(&self, stem: &Path) -> dtmsig::Result<()> {
        let path = stem.with_extension("manifest.json");
        std::fs::write(path, self.render() + "\n")?;
        Ok(())
    }

    /// Manifest for a JSON report: next to `--out` when given, otherwise on
    /// stderr (stdout stays reserved for the report itself).
    pub fn write_for_report(&self, out: Option<&Path>) -> dtmsig::Result<()> {
        match out {
            Some(path) => self.write_alongside(path),
            None => {
                eprintln!("{}", self.render());
                Ok(())
            }
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
