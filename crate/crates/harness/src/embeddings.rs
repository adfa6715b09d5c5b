//! Word and sentence vectors behind one provider interface.
//!
//! Static vector file: one `token v1 v2 ... vD` line per token; an optional
//! first line `count dim` (word2vec text format) is skipped. Fixture file:
//! a JSON object mapping text to vector. Remote: `POST {"model", "input":
//! [..]}` answered by `{"data": [{"embedding": [..]}, ..]}` in input order.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::{bail, ensure, Context, Result};
use serde::Deserialize;
use usersim_core::embedding::EmbeddingVector;

use crate::config::ProviderConfig;
use crate::io::sha256_hex;

/// Inputs per remote request.
const REMOTE_BATCH: usize = 64;

/// Maps texts to vectors; `None` marks text the provider cannot embed
/// (out-of-vocabulary words).
pub trait Provider: Send + Sync {
    fn id(&self) -> String;
    fn embed(&self, texts: &[&str]) -> Result<Vec<Option<Vec<f64>>>>;
    fn preflight(&self) -> Result<()> {
        Ok(())
    }
}

/// Word vectors loaded from a text file.
#[derive(Debug, Clone)]
pub struct StaticVectors {
    id: String,
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl StaticVectors {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, format!("static:{}", &sha256_hex(&text)[..12]))
            .with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str, id: impl Into<String>) -> Result<Self> {
        let mut vectors = HashMap::new();
        let mut dim = 0;
        for (n, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let values: Vec<f64> = parts
                .map(str::parse)
                .collect::<Result<_, _>>()
                .with_context(|| format!("line {}: bad number", n + 1))?;
            if n == 0 && values.len() == 1 && token.parse::<usize>().is_ok() {
                continue;
            }
            ensure!(!values.is_empty(), "line {}: token {token:?} has no values", n + 1);
            ensure!(values.iter().all(|v| v.is_finite()), "line {}: non-finite value", n + 1);
            if dim == 0 {
                dim = values.len();
            }
            ensure!(
                values.len() == dim,
                "line {}: expected {dim} values, found {}",
                n + 1,
                values.len()
            );
            vectors.entry(token.to_lowercase()).or_insert(values);
        }
        ensure!(!vectors.is_empty(), "no vectors");
        Ok(StaticVectors {
            id: id.into(),
            dim,
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }
}

impl Provider for StaticVectors {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Option<Vec<f64>>>> {
        Ok(texts.iter().map(|t| self.get(t).map(<[f64]>::to_vec)).collect())
    }
}

/// Sentence vectors as the mean of the static vectors of their tokens.
/// A sentence with no known token cannot be embedded.
#[derive(Debug, Clone)]
pub struct MeanPool {
    words: StaticVectors,
}

impl MeanPool {
    pub fn new(words: StaticVectors) -> Self {
        MeanPool { words }
    }
}

impl Provider for MeanPool {
    fn id(&self) -> String {
        format!("mean_pool:{}", self.words.id)
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Option<Vec<f64>>>> {
        Ok(texts
            .iter()
            .map(|t| {
                let mut sum = vec![0.0; self.words.dim];
                let mut n = 0usize;
                for tok in usersim_core::metrics::tokenize(t) {
                    if let Some(v) = self.words.get(&tok) {
                        sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
                        n += 1;
                    }
                }
                (n > 0).then(|| sum.into_iter().map(|s| s / n as f64).collect())
            })
            .collect())
    }
}

/// Exact vectors for known texts.
#[derive(Debug, Clone)]
pub struct FixtureProvider {
    id: String,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl FixtureProvider {
    pub fn new(id: impl Into<String>, vectors: BTreeMap<String, Vec<f64>>) -> Self {
        FixtureProvider { id: id.into(), vectors }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let vectors: BTreeMap<String, Vec<f64>> =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(Self::new(format!("fixture:{}", &sha256_hex(&text)[..12]), vectors))
    }
}

impl Provider for FixtureProvider {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Option<Vec<f64>>>> {
        Ok(texts.iter().map(|t| self.vectors.get(*t).cloned()).collect())
    }
}

/// An OpenAI-style embeddings endpoint.
pub struct RemoteProvider {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key_env: Option<String>,
}

#[derive(Deserialize)]
struct RemoteResponse {
    data: Vec<RemoteDatum>,
}

#[derive(Deserialize)]
struct RemoteDatum {
    embedding: Vec<f64>,
}

impl RemoteProvider {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key_env: Option<String>) -> Self {
        RemoteProvider {
            agent: crate::gateway::http_agent(Duration::from_secs(120)),
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env,
        }
    }

    fn call(&self, batch: &[&str]) -> Result<Vec<Vec<f64>>> {
        let key = crate::gateway::credential(self.api_key_env.as_deref())?;
        let body = serde_json::json!({ "model": self.model, "input": batch });
        let mut req = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send(body.to_string())
            .with_context(|| format!("embedding request to {} failed", self.endpoint))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string()?;
        if status != 200 {
            bail!(
                "embedding endpoint answered HTTP {status}: {}",
                text.chars().take(300).collect::<String>()
            );
        }
        let parsed: RemoteResponse = serde_json::from_str(&text).context("malformed embedding response")?;
        ensure!(
            parsed.data.len() == batch.len(),
            "embedding endpoint returned {} vectors for {} inputs",
            parsed.data.len(),
            batch.len()
        );
        Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
    }
}

impl Provider for RemoteProvider {
    fn id(&self) -> String {
        format!("remote:{}", self.model)
    }

    fn preflight(&self) -> Result<()> {
        crate::gateway::credential(self.api_key_env.as_deref())?;
        Ok(())
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Option<Vec<f64>>>> {
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(REMOTE_BATCH) {
            let mut last = None;
            for attempt in 0..3 {
                match self.call(batch) {
                    Ok(v) => {
                        last = Some(Ok(v));
                        break;
                    }
                    Err(e) => {
                        log::warn!("embedding batch failed (attempt {}): {e:#}", attempt + 1);
                        last = Some(Err(e));
                        std::thread::sleep(Duration::from_millis(500 << attempt));
                    }
                }
            }
            out.extend(last.expect("at least one attempt")?.into_iter().map(Some));
        }
        Ok(out)
    }
}

pub fn provider_from_config(cfg: &ProviderConfig) -> Result<Arc<dyn Provider>> {
    Ok(match cfg {
        ProviderConfig::Static { path } => Arc::new(StaticVectors::load(path)?),
        ProviderConfig::MeanPool { path } => Arc::new(MeanPool::new(StaticVectors::load(path)?)),
        ProviderConfig::Fixture { path } => Arc::new(FixtureProvider::load(path)?),
        ProviderConfig::Remote {
            endpoint,
            model,
            api_key_env,
        } => Arc::new(RemoteProvider::new(
            endpoint.clone(),
            model.clone(),
            api_key_env.clone(),
        )),
    })
}

/// A provider with a per-text cache shared across calls.
pub struct Embedder {
    provider: Arc<dyn Provider>,
    id: String,
    cache: Mutex<HashMap<String, Option<Vec<f64>>>>,
}

/// Vectors for a vocabulary; tokens the provider does not know are counted
/// and left out.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    pub vectors: BTreeMap<String, EmbeddingVector>,
    pub oov: usize,
}

impl Embedder {
    pub fn new(provider: Arc<dyn Provider>) -> Self {
        let id = provider.id();
        Embedder {
            provider,
            id,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn preflight(&self) -> Result<()> {
        self.provider.preflight()
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    fn lookup(&self, texts: &[&str]) -> Result<Vec<Option<Vec<f64>>>> {
        let missing: Vec<&str> = {
            let cache = self.cache.lock().unwrap();
            let mut seen = std::collections::HashSet::new();
            texts
                .iter()
                .copied()
                .filter(|t| !cache.contains_key(*t) && seen.insert(*t))
                .collect()
        };
        if !missing.is_empty() {
            let fresh = self.provider.embed(&missing)?;
            ensure!(
                fresh.len() == missing.len(),
                "provider {} returned the wrong number of vectors",
                self.id
            );
            let mut cache = self.cache.lock().unwrap();
            for (t, v) in missing.into_iter().zip(fresh) {
                cache.insert(t.to_string(), v);
            }
        }
        let cache = self.cache.lock().unwrap();
        Ok(texts.iter().map(|t| cache[*t].clone()).collect())
    }

    fn vector(&self, values: Vec<f64>) -> Result<EmbeddingVector> {
        EmbeddingVector::new(values, self.id.clone()).map_err(|e| anyhow::anyhow!("provider {}: {e}", self.id))
    }

    pub fn embed_words(&self, tokens: &[&str]) -> Result<WordVectors> {
        let found = self.lookup(tokens)?;
        let mut vectors = BTreeMap::new();
        let mut oov = 0;
        let mut dim = None;
        for (t, v) in tokens.iter().zip(found) {
            match v {
                Some(v) => {
                    let v = self.vector(v)?;
                    check_dim(&mut dim, &v, &self.id)?;
                    vectors.insert(t.to_string(), v);
                }
                None => oov += 1,
            }
        }
        Ok(WordVectors { vectors, oov })
    }

    /// One vector per text, in order. Any text that cannot be embedded is
    /// an error: a partial set would bias diversity.
    pub fn embed_sentences(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        ensure!(!texts.is_empty(), "no texts to embed");
        let found = self.lookup(texts)?;
        let mut out = Vec::with_capacity(texts.len());
        let mut dim = None;
        for (t, v) in texts.iter().zip(found) {
            let Some(v) = v else {
                bail!(
                    "provider {} cannot embed {:?}",
                    self.id,
                    t.chars().take(60).collect::<String>()
                );
            };
            let v = self.vector(v)?;
            check_dim(&mut dim, &v, &self.id)?;
            out.push(v);
        }
        Ok(out)
    }
}

fn check_dim(dim: &mut Option<usize>, v: &EmbeddingVector, id: &str) -> Result<()> {
    match *dim {
        None => *dim = Some(v.dim()),
        Some(d) if d != v.dim() => bail!("provider {id} mixed dimensions {d} and {}", v.dim()),
        Some(_) => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const VECS: &str = "3 2\ncast 1 0\nplot 0 1\nGood 0.5 0.5\n";

    #[test]
    fn static_file_skips_header_and_lowercases() {
        let s = StaticVectors::parse(VECS, "t").unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.get("good"), Some(&[0.5, 0.5][..]));
        assert!(StaticVectors::parse("a 1 2\nb 1\n", "t").is_err());
        assert!(StaticVectors::parse("a 1 NaN\n", "t").is_err());
    }

    #[test]
    fn words_count_oov_and_cache() {
        let e = Embedder::new(Arc::new(StaticVectors::parse(VECS, "t").unwrap()));
        assert!(e.embed_words(&[]).unwrap().vectors.is_empty());
        let w = e.embed_words(&["cast", "zebra", "plot"]).unwrap();
        assert_eq!(w.oov, 1);
        assert_eq!(w.vectors["cast"].values(), &[1.0, 0.0]);
        assert_eq!(e.cached(), 3);
        let again = e.embed_words(&["cast"]).unwrap();
        assert_eq!(again.vectors["cast"], w.vectors["cast"]);
        assert_eq!(e.cached(), 3);
    }

    #[test]
    fn mean_pool_sentences() {
        let e = Embedder::new(Arc::new(MeanPool::new(StaticVectors::parse(VECS, "t").unwrap())));
        let v = e.embed_sentences(&["The cast and the plot", "cast"]).unwrap();
        assert_eq!(v[0].values(), &[0.5, 0.5]);
        assert_eq!(v[1].values(), &[1.0, 0.0]);
        assert!(e.embed_sentences(&["nothing known here"]).is_err());
        assert!(e.embed_sentences(&[]).is_err());
    }

    #[test]
    fn fixture_vectors_are_exact() {
        let mut m = BTreeMap::new();
        for (i, t) in ["a", "b", "c", "d", "e"].iter().enumerate() {
            m.insert(t.to_string(), vec![i as f64 + 0.125, -(i as f64)]);
        }
        let e = Embedder::new(Arc::new(FixtureProvider::new("f", m.clone())));
        let v = e.embed_sentences(&["e", "a", "c"]).unwrap();
        assert_eq!(v[0].values(), m["e"].as_slice());
        assert_eq!(v[1].values(), m["a"].as_slice());
        assert_eq!(v[2].values(), m["c"].as_slice());
    }
}
