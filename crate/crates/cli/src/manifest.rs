use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::spec::{sha256_file, BacktestSpec, ExportSpec, GenerateSpec, LatencySpec, TrainSpec};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunSpec {
    Backtest(BacktestSpec),
    Latency(LatencySpec),
    TrainLinearq(TrainSpec),
    Generate(GenerateSpec),
    ExportDataset(ExportSpec),
}

impl RunSpec {
    pub fn data_checksum(&self) -> String {
        match self {
            RunSpec::Backtest(s) => s.data.checksum(),
            RunSpec::Latency(s) => s.data.checksum(),
            RunSpec::TrainLinearq(s) => s.data.checksum(),
            RunSpec::ExportDataset(s) => s.data.checksum(),
            RunSpec::Generate(s) => {
                crate::spec::DataSpec::Synthetic { config: s.synthetic.clone() }.checksum()
            }
        }
    }
}

/// Written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    pub spec: RunSpec,
    pub data_sha256: String,
    /// Deterministic outputs and their sha256.
    pub outputs: BTreeMap<String, String>,
    /// Outputs that carry wall-clock measurements and are not compared on rerun.
    #[serde(default)]
    pub unchecked: Vec<String>,
}

impl RunManifest {
    pub fn new(seed: u64, spec: RunSpec) -> Self {
        let data_sha256 = spec.data_checksum();
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            spec,
            data_sha256,
            outputs: BTreeMap::new(),
            unchecked: Vec::new(),
        }
    }

    /// Records checksums for `files` (relative to `dir`) and writes the manifest.
    pub fn finish(mut self, dir: &Path, files: &[&str], unchecked: &[&str]) -> anyhow::Result<Self> {
        for f in files {
            self.outputs.insert(f.to_string(), sha256_file(&dir.join(f))?);
        }
        self.unchecked = unchecked.iter().map(|s| s.to_string()).collect();
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&self)? + "\n")?;
        Ok(self)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}
