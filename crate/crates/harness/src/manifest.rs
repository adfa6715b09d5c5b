//! `manifest.json`: everything needed to reproduce a run directory, and
//! hashes of everything it contains.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::gateway::BackendInfo;
use crate::io::{self, sha256_hex};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Subdirectories a run owns; they are cleared before each run writes.
pub const RUN_SUBDIRS: [&str; 5] = ["cases", "replies", "reports", "tables", "charts"];

/// The command-line choices that shaped the run. Paths are reduced to file
/// names so manifests do not depend on where a run was made.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCommand {
    pub tasks: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
    pub seed: u64,
    pub explanations: bool,
    pub reasons: bool,
    pub config_file: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetVersion {
    /// Hash of the raw input recorded at ingest time.
    pub input_sha256: String,
    /// Ingested file name to hash.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: RunCommand,
    pub config_sha256: String,
    pub backend: BackendInfo,
    /// Provider ids for embeddings and aspect extraction, when used.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub providers: BTreeMap<String, String>,
    /// Template stem to hash of the text actually used.
    pub templates: BTreeMap<String, String>,
    pub datasets: BTreeMap<String, DatasetVersion>,
    /// Relative path to hash of every file in the run directory.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn hash_outputs<'a>(files: impl IntoIterator<Item = (&'a String, &'a Vec<u8>)>) -> BTreeMap<String, String> {
        files.into_iter().map(|(k, v)| (k.clone(), sha256_hex(v))).collect()
    }

    pub fn load(run_dir: &Path) -> Result<Self> {
        io::read_json(&run_dir.join(MANIFEST_FILE))
            .with_context(|| format!("{} has no readable {MANIFEST_FILE}", run_dir.display()))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut v = serde_json::to_vec_pretty(self)?;
        v.push(b'\n');
        Ok(v)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Verification {
    pub checked: usize,
    pub mismatched: Vec<String>,
    pub missing: Vec<String>,
    /// Files in run subdirectories the manifest does not list.
    pub unexpected: Vec<String>,
}

impl Verification {
    pub fn ok(&self) -> bool {
        self.mismatched.is_empty() && self.missing.is_empty() && self.unexpected.is_empty()
    }
}

/// Every file under the run subdirectories, as sorted relative paths.
pub fn list_outputs(run_dir: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for sub in RUN_SUBDIRS {
        let dir = run_dir.join(sub);
        if !dir.is_dir() {
            continue;
        }
        for entry in std::fs::read_dir(&dir).with_context(|| format!("reading {}", dir.display()))? {
            let p = entry?.path();
            if p.is_file() {
                out.push(format!("{sub}/{}", p.file_name().unwrap_or_default().to_string_lossy()));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Recomputes the hash of every output the manifest lists.
pub fn verify(run_dir: &Path) -> Result<Verification> {
    let m = Manifest::load(run_dir)?;
    let mut v = Verification::default();
    for (rel, want) in &m.outputs {
        let p = run_dir.join(rel);
        if !p.is_file() {
            v.missing.push(rel.clone());
            continue;
        }
        v.checked += 1;
        if &io::sha256_file(&p)? != want {
            v.mismatched.push(rel.clone());
        }
    }
    v.unexpected = list_outputs(run_dir)?
        .into_iter()
        .filter(|r| !m.outputs.contains_key(r))
        .collect();
    Ok(v)
}
