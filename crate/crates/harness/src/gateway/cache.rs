use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::io;

/// Content-addressed response store: `<dir>/<k[0..2]>/<k>.json`. Writes
/// are atomic, so concurrent readers see either nothing or a whole entry.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    text: String,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        let shard = key.get(..2).unwrap_or("__");
        self.dir.join(shard).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<String>> {
        let p = self.path(key);
        if !p.is_file() {
            return Ok(None);
        }
        let e: Entry = io::read_json(&p)?;
        if e.key != key {
            anyhow::bail!("{} holds key {}", p.display(), e.key);
        }
        Ok(Some(e.text))
    }

    pub fn put(&self, key: &str, text: &str) -> Result<()> {
        let e = Entry {
            key: key.to_string(),
            text: text.to_string(),
        };
        let bytes = serde_json::to_vec(&e)?;
        io::write_atomic(&self.path(key), &bytes).with_context(|| format!("caching {key}"))
    }
}
