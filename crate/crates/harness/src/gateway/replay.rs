use std::collections::HashMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, BackendInfo, CompletionRequest};
use crate::config::BackendConfig;
use crate::io;

/// One recorded response. Lines of a run's `replies/*.jsonl` audit log are
/// valid entries, so any run can be replayed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    /// Replay key of `(prompt, nonce)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    /// SHA-256 of the prompt alone; matches any nonce.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
    #[serde(alias = "raw_text", default)]
    pub text: Option<String>,
}

/// Offline backend answering from recorded responses. Lookup tries the
/// exact `(prompt, nonce)` key, then the prompt hash; unknown prompts are
/// an error in strict mode and get `fallback` otherwise.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    by_key: HashMap<String, String>,
    by_prompt: HashMap<String, String>,
    strict: bool,
    fallback: Option<String>,
}

impl ReplayBackend {
    pub fn strict() -> Self {
        ReplayBackend {
            strict: true,
            ..Default::default()
        }
    }

    pub fn lenient(fallback: impl Into<String>) -> Self {
        ReplayBackend {
            strict: false,
            fallback: Some(fallback.into()),
            ..Default::default()
        }
    }

    pub fn from_config(cfg: &BackendConfig) -> Result<Self> {
        let mut b = if cfg.strict {
            Self::strict()
        } else {
            Self::lenient(cfg.fallback.clone().unwrap_or_default())
        };
        let path = cfg.fixture.as_deref().context("replay backend needs a fixture")?;
        b.load(path)?;
        Ok(b)
    }

    /// Adds every entry of a JSONL file; lines without text (headers,
    /// failed calls) are ignored.
    pub fn load(&mut self, path: &Path) -> Result<usize> {
        let mut bad = 0usize;
        let entries = io::read_plain_jsonl::<ReplayEntry>(path, |_, _| bad += 1)
            .with_context(|| format!("loading replay fixture {}", path.display()))?;
        if bad > 0 {
            log::warn!("{}: {bad} undecodable lines ignored", path.display());
        }
        let mut n = 0;
        for (_, e) in entries {
            if e.text.is_some() && (e.key.is_some() || e.prompt_sha256.is_some()) {
                self.insert(e);
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn insert(&mut self, e: ReplayEntry) {
        let Some(text) = e.text else { return };
        if let Some(k) = e.key {
            self.by_key.insert(k, text.clone());
        }
        if let Some(p) = e.prompt_sha256 {
            self.by_prompt.entry(p).or_insert(text);
        }
    }

    pub fn with_prompt(mut self, prompt: &str, text: impl Into<String>) -> Self {
        self.insert(ReplayEntry {
            key: None,
            prompt_sha256: Some(io::sha256_hex(prompt)),
            text: Some(text.into()),
        });
        self
    }

    pub fn len(&self) -> usize {
        self.by_key.len().max(self.by_prompt.len())
    }

    pub fn is_empty(&self) -> bool {
        self.by_key.is_empty() && self.by_prompt.is_empty()
    }
}

impl Backend for ReplayBackend {
    fn info(&self) -> BackendInfo {
        BackendInfo {
            kind: "replay".into(),
            model: "replay".into(),
            endpoint: None,
            sampling: serde_json::json!({ "strict": self.strict }),
        }
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        if let Some(t) = self.by_key.get(&request.replay_key()) {
            return Ok(t.clone());
        }
        if let Some(t) = self.by_prompt.get(&request.prompt_sha256()) {
            return Ok(t.clone());
        }
        match (&self.fallback, self.strict) {
            (Some(f), false) => Ok(f.clone()),
            _ => Err(BackendError::Permanent(format!(
                "no recorded response for case {}",
                request.case_id
            ))),
        }
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}
