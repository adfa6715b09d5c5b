//! The run configuration file (TOML).
//!
//! ```toml
//! [backend]
//! kind = "http"                # or "replay"
//! model = "gpt-4o-mini"
//! endpoint = "https://api.openai.com/v1/chat/completions"
//! api_key_env = "OPENAI_API_KEY"
//! # temperature = 1.0          # omitted: provider default
//! max_retries = 3
//! max_in_flight = 8
//! cache_dir = "cache"
//!
//! [embeddings.word]
//! kind = "static"              # "static" | "remote" | "fixture"
//! path = "vectors.txt"
//!
//! [embeddings.sentence]
//! kind = "mean_pool"           # "mean_pool" | "remote" | "fixture"
//! path = "vectors.txt"
//!
//! [absa]
//! kind = "lexicon"             # "lexicon" | "fixture" | "remote" | "prompt"
//!
//! [run]
//! n_simulators = 100
//! groups = [{ preset = "frequent" }, { preset = "infrequent" }]
//! ```
//!
//! Relative paths are resolved against the directory holding the file.
//! Credentials are never stored here, only the name of the environment
//! variable that holds them.

use std::ops::Bound;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use usersim_core::catalog::GroupSpec;
use usersim_core::parse::DEFAULT_FUZZY_THRESHOLD;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub backend: BackendConfig,
    #[serde(default)]
    pub embeddings: EmbeddingsConfig,
    #[serde(default)]
    pub absa: AbsaConfig,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_tokens: Option<u32>,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Replay: recorded responses (JSONL).
    #[serde(default)]
    pub fixture: Option<PathBuf>,
    /// Replay: fail on unknown prompts instead of answering `fallback`.
    #[serde(default = "yes")]
    pub strict: bool,
    #[serde(default)]
    pub fallback: Option<String>,
}

fn default_model() -> String {
    "replay".into()
}
fn default_retries() -> u32 {
    3
}
fn default_in_flight() -> usize {
    4
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_timeout() -> u64 {
    120
}
fn yes() -> bool {
    true
}

impl BackendConfig {
    pub fn replay(fixture: impl Into<PathBuf>) -> Self {
        BackendConfig {
            kind: BackendKind::Replay,
            model: default_model(),
            endpoint: None,
            api_key_env: None,
            temperature: None,
            max_tokens: None,
            max_retries: 0,
            max_in_flight: 1,
            backoff_ms: 0,
            timeout_secs: default_timeout(),
            cache_dir: None,
            fixture: Some(fixture.into()),
            strict: true,
            fallback: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_in_flight < 1 {
            bail!("backend.max_in_flight must be at least 1");
        }
        if let Some(t) = self.temperature {
            if !(t.is_finite() && t >= 0.0) {
                bail!("backend.temperature must be a non-negative number");
            }
        }
        match self.kind {
            BackendKind::Http => {
                if self.endpoint.as_deref().is_none_or(str::is_empty) {
                    bail!("backend.endpoint is required for kind = \"http\"");
                }
            }
            BackendKind::Replay => {
                if self.fixture.is_none() {
                    bail!("backend.fixture is required for kind = \"replay\"");
                }
                if !self.strict && self.fallback.is_none() {
                    bail!("backend.fallback is required when strict = false");
                }
            }
        }
        Ok(())
    }

    /// Sampling parameters as recorded in cache keys and run metadata.
    pub fn sampling(&self) -> serde_json::Value {
        serde_json::json!({
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderConfig {
    /// Word vectors from a text file, `token v1 ... vD` per line.
    Static { path: PathBuf },
    /// Sentence vectors as the mean of static word vectors.
    MeanPool { path: PathBuf },
    /// Vectors looked up in a JSON object `{ "text": [v1, ...] }`.
    Fixture { path: PathBuf },
    /// An embeddings endpoint taking `{"model", "input": [..]}` and
    /// answering `{"data": [{"embedding": [..]}]}`.
    Remote {
        endpoint: String,
        model: String,
        #[serde(default)]
        api_key_env: Option<String>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingsConfig {
    #[serde(default)]
    pub word: Option<ProviderConfig>,
    #[serde(default)]
    pub sentence: Option<ProviderConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AbsaKind {
    /// Built-in keyword lexicon.
    Lexicon,
    /// JSONL `{"text", "pairs": [{"aspect", "sentiment"}]}`.
    Fixture { path: PathBuf },
    /// The extraction service (`POST {"texts": [..]}`).
    Remote {
        endpoint: String,
        #[serde(default = "default_absa_timeout")]
        timeout_secs: u64,
    },
    /// Ask the configured model for JSON pairs.
    Prompt,
}

fn default_absa_timeout() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsaConfig {
    #[serde(flatten)]
    pub kind: AbsaKind,
    /// Fold plain plurals (`plots` → `plot`).
    #[serde(default)]
    pub stem: bool,
}

impl Default for AbsaConfig {
    fn default() -> Self {
        AbsaConfig {
            kind: AbsaKind::Lexicon,
            stem: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    /// `frequent`, `infrequent` or `random`.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub name: Option<String>,
    /// Inclusive lower bound on rating count.
    #[serde(default)]
    pub min: Option<u64>,
    /// Exclusive lower bound.
    #[serde(default)]
    pub above: Option<u64>,
    /// Inclusive upper bound.
    #[serde(default)]
    pub max: Option<u64>,
    /// Exclusive upper bound.
    #[serde(default)]
    pub below: Option<u64>,
    #[serde(default)]
    pub sample_size: Option<usize>,
}

impl GroupConfig {
    pub fn preset(name: &str) -> Self {
        GroupConfig {
            preset: Some(name.into()),
            name: None,
            min: None,
            above: None,
            max: None,
            below: None,
            sample_size: None,
        }
    }

    pub fn to_spec(&self) -> Result<GroupSpec> {
        let mut spec = match self.preset.as_deref() {
            Some("frequent") => GroupSpec::frequent(),
            Some("infrequent") => GroupSpec::infrequent(),
            Some("random") => GroupSpec::random(),
            Some(other) => bail!("unknown group preset {other:?}"),
            None => {
                let name = self.name.clone().context("a custom group needs a name")?;
                let size = self.sample_size.context("a custom group needs sample_size")?;
                GroupSpec {
                    name,
                    lower: Bound::Unbounded,
                    upper: Bound::Unbounded,
                    sample_size: size,
                }
            }
        };
        if let Some(n) = &self.name {
            spec.name = n.clone();
        }
        if self.min.is_some() && self.above.is_some() {
            bail!("group {}: set only one of min and above", spec.name);
        }
        if self.max.is_some() && self.below.is_some() {
            bail!("group {}: set only one of max and below", spec.name);
        }
        if let Some(v) = self.min {
            spec.lower = Bound::Included(v);
        }
        if let Some(v) = self.above {
            spec.lower = Bound::Excluded(v);
        }
        if let Some(v) = self.max {
            spec.upper = Bound::Included(v);
        }
        if let Some(v) = self.below {
            spec.upper = Bound::Excluded(v);
        }
        if let Some(s) = self.sample_size {
            spec = spec.with_size(s);
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_n_simulators")]
    pub n_simulators: usize,
    #[serde(default = "default_groups")]
    pub groups: Vec<GroupConfig>,
    #[serde(default = "default_fuzzy")]
    pub fuzzy_threshold: f64,
    #[serde(default = "yes")]
    pub keep_unmatched: bool,
    #[serde(default = "default_bins")]
    pub num_bins: usize,
    /// Abort a task when more than this share of its cases fail.
    #[serde(default = "default_abort")]
    pub abort_threshold: f64,
    #[serde(default)]
    pub surnames: Option<PathBuf>,
    /// Directory of `<template>.txt` overrides.
    #[serde(default)]
    pub templates: Option<PathBuf>,
}

fn default_n_simulators() -> usize {
    100
}
fn default_groups() -> Vec<GroupConfig> {
    vec![GroupConfig::preset("frequent"), GroupConfig::preset("infrequent")]
}
fn default_fuzzy() -> f64 {
    DEFAULT_FUZZY_THRESHOLD
}
fn default_bins() -> usize {
    usersim_core::metrics::DEFAULT_NUM_BINS
}
fn default_abort() -> f64 {
    0.5
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_simulators: default_n_simulators(),
            groups: default_groups(),
            fuzzy_threshold: default_fuzzy(),
            keep_unmatched: true,
            num_bins: default_bins(),
            abort_threshold: default_abort(),
            surnames: None,
            templates: None,
        }
    }
}

impl RunConfig {
    pub fn group_specs(&self) -> Result<Vec<GroupSpec>> {
        self.groups.iter().map(GroupConfig::to_spec).collect()
    }
}

impl Config {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Config = toml::from_str(text)?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).with_context(|| format!("invalid config {}", path.display()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            self.backend.cache_dir.as_mut(),
            self.backend.fixture.as_mut(),
            self.run.surnames.as_mut(),
            self.run.templates.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        for prov in [self.embeddings.word.as_mut(), self.embeddings.sentence.as_mut()]
            .into_iter()
            .flatten()
        {
            match prov {
                ProviderConfig::Static { path }
                | ProviderConfig::MeanPool { path }
                | ProviderConfig::Fixture { path } => fix(path),
                ProviderConfig::Remote { .. } => {}
            }
        }
        if let AbsaKind::Fixture { path } = &mut self.absa.kind {
            fix(path);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.backend.validate()?;
        if self.run.n_simulators < 1 {
            bail!("run.n_simulators must be at least 1");
        }
        if self.run.num_bins < 1 {
            bail!("run.num_bins must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.run.abort_threshold) {
            bail!("run.abort_threshold must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.run.fuzzy_threshold) {
            bail!("run.fuzzy_threshold must lie in [0, 1]");
        }
        self.run.group_specs()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_replay_config() {
        let cfg = Config::from_toml(
            "[backend]\nkind = \"replay\"\nfixture = \"r.jsonl\"\n",
            Path::new("/base"),
        )
        .unwrap();
        assert_eq!(cfg.backend.fixture.as_deref(), Some(Path::new("/base/r.jsonl")));
        assert_eq!(cfg.run.n_simulators, 100);
        let specs = cfg.run.group_specs().unwrap();
        assert_eq!(specs, [GroupSpec::frequent(), GroupSpec::infrequent()]);
        assert_eq!(cfg.absa.kind, AbsaKind::Lexicon);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            "[backend]\nkind = \"http\"\n",
            "[backend]\nkind = \"replay\"\n",
            "[backend]\nkind = \"replay\"\nfixture = \"x\"\nmax_in_flight = 0\n",
            "[backend]\nkind = \"replay\"\nfixture = \"x\"\nstrict = false\n",
            "[backend]\nkind = \"replay\"\nfixture = \"x\"\nbogus = 1\n",
            "[backend]\nkind = \"replay\"\nfixture = \"x\"\n[run]\ngroups = [{ preset = \"hot\" }]\n",
        ];
        for text in bad {
            assert!(Config::from_toml(text, Path::new(".")).is_err(), "{text}");
        }
    }

    #[test]
    fn custom_groups_and_providers() {
        let cfg = Config::from_toml(
            r#"
[backend]
kind = "replay"
fixture = "r.jsonl"
[embeddings]
word = { kind = "static", path = "v.txt" }
sentence = { kind = "remote", endpoint = "http://x", model = "m" }
[absa]
kind = "fixture"
path = "a.jsonl"
stem = true
[run]
groups = [{ preset = "infrequent", sample_size = 3 }, { name = "mid", min = 10, below = 20, sample_size = 2 }]
"#,
            Path::new("/b"),
        )
        .unwrap();
        let specs = cfg.run.group_specs().unwrap();
        assert_eq!(specs[0], GroupSpec::infrequent().with_size(3));
        assert!(specs[1].admits(10) && specs[1].admits(19) && !specs[1].admits(20));
        assert_eq!(
            cfg.embeddings.word,
            Some(ProviderConfig::Static {
                path: "/b/v.txt".into()
            })
        );
        assert!(cfg.absa.stem);
        assert_eq!(
            cfg.absa.kind,
            AbsaKind::Fixture {
                path: "/b/a.jsonl".into()
            }
        );
    }
}
