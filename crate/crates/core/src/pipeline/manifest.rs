use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{read_to_string, write_string};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    /// Artifact name inside the output directory, or the input path as given.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub stage: String,
    pub version: String,
    pub master_seed: u64,
    /// Seed of the stage's own random stream, if it uses one.
    pub stream_seed: Option<u64>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

/// Stage entries keyed by run order. Rerunning a stage replaces its entry.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(out: &Path) -> Result<Self> {
        let path = out.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Manifest::default());
        }
        Ok(serde_json::from_str(&read_to_string(&path)?)?)
    }

    pub fn save(&self, out: &Path) -> Result<()> {
        write_string(&out.join(MANIFEST_FILE), &(serde_json::to_string_pretty(self)? + "\n"))
    }

    pub fn entry(&self, stage: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.stage == stage)
    }

    /// Inserts or replaces the entry for its stage, keeping `order`.
    pub fn record(&mut self, entry: ManifestEntry, order: &[&str]) {
        self.entries.retain(|e| e.stage != entry.stage);
        self.entries.push(entry);
        let rank = |s: &str| order.iter().position(|o| *o == s).unwrap_or(order.len());
        self.entries.sort_by_key(|e| rank(&e.stage));
    }

    /// Checks every recorded output against the file on disk, and every
    /// input that another stage produced against that stage's output hash.
    pub fn verify(&self, out: &Path) -> Result<()> {
        let mut produced: BTreeMap<&str, (&str, &str)> = BTreeMap::new();
        for e in &self.entries {
            for f in &e.outputs {
                let bytes = std::fs::read(out.join(&f.path)).map_err(|err| Error::io(out.join(&f.path), err))?;
                if sha256_hex(&bytes) != f.sha256 {
                    return Err(Error::Data(format!(
                        "{} no longer matches the hash recorded by `{}`",
                        f.path, e.stage
                    )));
                }
                produced.insert(&f.path, (&f.sha256, &e.stage));
            }
        }
        for e in &self.entries {
            for f in &e.inputs {
                if let Some((hash, by)) = produced.get(f.path.as_str()) {
                    if *hash != f.sha256 {
                        return Err(Error::Data(format!(
                            "`{}` read {} with a different hash than `{by}` wrote; rerun `{}`",
                            e.stage, f.path, e.stage
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
