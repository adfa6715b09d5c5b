//! Aspect-sentiment extraction backends.
//!
//! Remote service protocol: `POST <endpoint>` with `{"texts": [..]}` (at
//! most 256 per request) answered by `{"results": [[{"aspect",
//! "sentiment"}, ..], ..]}` in input order. 400 means a malformed body, 413
//! an oversized batch and 500 a model failure. `GET <base>/health` answers
//! `{"model_version", "label_set"}`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use usersim_core::aspect::{AspectSentiment, Sentiment};

use crate::config::{AbsaConfig, AbsaKind};
use crate::gateway::{CompletionRequest, Gateway};
use crate::io::{self, sha256_hex};

/// Largest batch the service accepts.
pub const MAX_BATCH: usize = 256;

pub type Pairs = Vec<(String, Sentiment)>;

pub trait Extractor: Send + Sync {
    fn id(&self) -> String;

    fn preflight(&self) -> Result<()> {
        Ok(())
    }

    /// One entry per text, in order. `None` marks a text whose extraction
    /// failed; it is excluded and counted. `Err` aborts the run.
    fn extract(&self, texts: &[&str]) -> Result<Vec<Option<Pairs>>>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WirePair {
    pub aspect: String,
    pub sentiment: String,
}

fn from_wire(pairs: Vec<WirePair>) -> Result<Pairs> {
    pairs
        .into_iter()
        .map(|p| {
            let s = Sentiment::parse(&p.sentiment).with_context(|| format!("unknown sentiment {:?}", p.sentiment))?;
            ensure!(!p.aspect.trim().is_empty(), "empty aspect");
            Ok((p.aspect, s))
        })
        .collect()
}

/// Extraction for a single non-empty text.
pub fn extract_aspects(
    text: &str,
    case_id: &str,
    extractor: &dyn Extractor,
    stem: bool,
) -> Result<Option<Vec<AspectSentiment>>> {
    ensure!(
        !text.trim().is_empty(),
        "{case_id}: cannot extract aspects from empty text"
    );
    let mut out = extractor.extract(&[text])?;
    ensure!(
        out.len() == 1,
        "extractor {} returned {} results for 1 text",
        extractor.id(),
        out.len()
    );
    out.pop().unwrap().map(|pairs| label(&pairs, case_id, stem)).transpose()
}

fn label(pairs: &Pairs, case_id: &str, stem: bool) -> Result<Vec<AspectSentiment>> {
    pairs
        .iter()
        .filter_map(|(a, s)| AspectSentiment::new(a, *s, case_id, stem).ok())
        .map(Ok)
        .collect()
}

/// Pairs extracted from a corpus plus per-text bookkeeping.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub pairs: Vec<AspectSentiment>,
    /// Pairs per text; `None` where extraction failed.
    pub per_text: Vec<Option<usize>>,
    pub excluded: usize,
}

/// Runs the extractor over `(case_id, text)` entries. Blank texts are
/// excluded without calling the extractor.
pub fn extract_corpus(extractor: &dyn Extractor, entries: &[(String, String)], stem: bool) -> Result<Extraction> {
    let idx: Vec<usize> = (0..entries.len())
        .filter(|&i| !entries[i].1.trim().is_empty())
        .collect();
    let texts: Vec<&str> = idx.iter().map(|&i| entries[i].1.as_str()).collect();
    let results = if texts.is_empty() {
        Vec::new()
    } else {
        extractor.extract(&texts)?
    };
    ensure!(
        results.len() == texts.len(),
        "extractor {} returned {} results for {} texts",
        extractor.id(),
        results.len(),
        texts.len()
    );
    let mut out = Extraction {
        per_text: vec![None; entries.len()],
        ..Default::default()
    };
    for (&i, r) in idx.iter().zip(results) {
        if let Some(pairs) = r {
            let labelled = label(&pairs, &entries[i].0, stem)?;
            out.per_text[i] = Some(labelled.len());
            out.pairs.extend(labelled);
        }
    }
    out.excluded = out.per_text.iter().filter(|p| p.is_none()).count();
    Ok(out)
}

// ---------------------------------------------------------------- lexicon

const ASPECT_TERMS: &[&str] = &[
    "acting",
    "action",
    "actor",
    "actors",
    "actress",
    "animation",
    "atmosphere",
    "cast",
    "character",
    "characters",
    "chemistry",
    "cinematography",
    "comedy",
    "costumes",
    "dialog",
    "dialogue",
    "direction",
    "director",
    "editing",
    "effects",
    "ending",
    "film",
    "humor",
    "humour",
    "lead",
    "length",
    "movie",
    "music",
    "pacing",
    "performance",
    "performances",
    "photography",
    "plot",
    "premise",
    "romance",
    "scene",
    "scenes",
    "score",
    "screenplay",
    "script",
    "sets",
    "soundtrack",
    "story",
    "storyline",
    "suspense",
    "twist",
    "villain",
    "visuals",
    "writing",
];

const POSITIVE_TERMS: &[&str] = &[
    "amazing",
    "awesome",
    "beautiful",
    "beautifully",
    "believable",
    "best",
    "brilliant",
    "captivating",
    "charming",
    "clever",
    "compelling",
    "enjoyable",
    "enjoyed",
    "engaging",
    "entertaining",
    "excellent",
    "fantastic",
    "fresh",
    "fun",
    "funny",
    "good",
    "gorgeous",
    "great",
    "gripping",
    "hilarious",
    "impressive",
    "incredible",
    "liked",
    "love",
    "loved",
    "masterful",
    "memorable",
    "moving",
    "nice",
    "outstanding",
    "perfect",
    "powerful",
    "solid",
    "strong",
    "stunning",
    "superb",
    "thrilling",
    "touching",
    "witty",
    "wonderful",
];

const NEGATIVE_TERMS: &[&str] = &[
    "annoying",
    "awful",
    "bad",
    "bland",
    "boring",
    "cheesy",
    "cliched",
    "clichéd",
    "confusing",
    "disappointed",
    "disappointing",
    "dragged",
    "drags",
    "dull",
    "flat",
    "forgettable",
    "hated",
    "horrible",
    "lacked",
    "lacking",
    "lame",
    "mediocre",
    "mess",
    "messy",
    "overlong",
    "pointless",
    "poor",
    "poorly",
    "predictable",
    "ridiculous",
    "silly",
    "slow",
    "stupid",
    "tedious",
    "terrible",
    "unconvincing",
    "weak",
    "wooden",
    "worst",
];

const NEGATORS: &[&str] = &[
    "not", "never", "no", "hardly", "isn't", "wasn't", "aren't", "weren't", "didn't", "doesn't", "don't",
];

const CLAUSE_BREAKS: &[&str] = &["but", "although", "though", "however", "whereas", "yet", "while"];

/// Keyword extractor: known aspect nouns take the polarity of the nearest
/// opinion words in their clause; negators within three words flip an
/// opinion. Aspects without an opinion are neutral.
#[derive(Debug, Clone, Default)]
pub struct LexiconExtractor;

impl LexiconExtractor {
    pub fn pairs(text: &str) -> Pairs {
        let lower = text.to_lowercase();
        let mut out: Pairs = Vec::new();
        for sentence in lower.split(['.', '!', '?', ';', ',', ':', '\n']) {
            let words: Vec<&str> = sentence
                .split(|c: char| !(c.is_alphanumeric() || c == '\''))
                .filter(|w| !w.is_empty())
                .collect();
            for clause in words.split(|w| CLAUSE_BREAKS.contains(w)) {
                out.extend(Self::clause(clause));
            }
        }
        out
    }

    fn clause(words: &[&str]) -> Pairs {
        let aspects: Vec<usize> = (0..words.len()).filter(|&i| ASPECT_TERMS.contains(&words[i])).collect();
        if aspects.is_empty() {
            return Vec::new();
        }
        let mut score = vec![0i32; aspects.len()];
        for (i, w) in words.iter().enumerate() {
            let mut s = if POSITIVE_TERMS.contains(w) {
                1
            } else if NEGATIVE_TERMS.contains(w) {
                -1
            } else {
                continue;
            };
            if words[i.saturating_sub(3)..i].iter().any(|p| NEGATORS.contains(p)) {
                s = -s;
            }
            let nearest = (0..aspects.len()).min_by_key(|&a| aspects[a].abs_diff(i)).unwrap();
            score[nearest] += s;
        }
        let mut seen = Vec::new();
        let mut out = Vec::new();
        for (a, &pos) in aspects.iter().enumerate() {
            let term = words[pos];
            if seen.contains(&term) {
                continue;
            }
            seen.push(term);
            let sentiment = match score[a] {
                s if s > 0 => Sentiment::Positive,
                s if s < 0 => Sentiment::Negative,
                _ => Sentiment::Neutral,
            };
            out.push((term.to_string(), sentiment));
        }
        out
    }
}

impl Extractor for LexiconExtractor {
    fn id(&self) -> String {
        "lexicon:1".into()
    }

    fn extract(&self, texts: &[&str]) -> Result<Vec<Option<Pairs>>> {
        Ok(texts.iter().map(|t| Some(Self::pairs(t))).collect())
    }
}

// ---------------------------------------------------------------- fixture

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub text: String,
    pub pairs: Vec<WirePair>,
}

/// Gold pairs for known texts; unknown texts count as failed extractions.
#[derive(Debug, Clone, Default)]
pub struct FixtureExtractor {
    id: String,
    gold: HashMap<String, Pairs>,
}

impl FixtureExtractor {
    pub fn new(id: impl Into<String>, entries: impl IntoIterator<Item = FixtureEntry>) -> Result<Self> {
        let mut gold = HashMap::new();
        for e in entries {
            gold.insert(e.text, from_wire(e.pairs)?);
        }
        Ok(FixtureExtractor { id: id.into(), gold })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let entries =
            io::read_plain_jsonl::<FixtureEntry>(path, |line, e| log::warn!("{}:{line}: {e}", path.display()))?;
        Self::new(
            format!("fixture:{}", &sha256_hex(&bytes)[..12]),
            entries.into_iter().map(|(_, e)| e),
        )
    }

    pub fn get(&self, text: &str) -> Option<&Pairs> {
        self.gold.get(text)
    }
}

impl Extractor for FixtureExtractor {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn extract(&self, texts: &[&str]) -> Result<Vec<Option<Pairs>>> {
        Ok(texts.iter().map(|t| self.gold.get(*t).cloned()).collect())
    }
}

// ---------------------------------------------------------------- remote

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub model_version: String,
    #[serde(default)]
    pub label_set: Vec<String>,
}

#[derive(Deserialize)]
struct RemoteResponse {
    results: Vec<Vec<WirePair>>,
}

/// Client for the extraction service.
pub struct RemoteExtractor {
    agent: ureq::Agent,
    endpoint: String,
    batch: usize,
}

impl RemoteExtractor {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        RemoteExtractor {
            agent: crate::gateway::http_agent(timeout),
            endpoint: endpoint.into(),
            batch: MAX_BATCH,
        }
    }

    pub fn with_batch(mut self, batch: usize) -> Self {
        self.batch = batch.clamp(1, MAX_BATCH);
        self
    }

    pub fn health_url(&self) -> String {
        match self.endpoint.rfind('/') {
            Some(i) if i > self.endpoint.find("://").map_or(0, |p| p + 2) => {
                format!("{}/health", &self.endpoint[..i])
            }
            _ => format!("{}/health", self.endpoint.trim_end_matches('/')),
        }
    }

    pub fn health(&self) -> Result<Health> {
        let url = self.health_url();
        let mut resp = self
            .agent
            .get(&url)
            .call()
            .with_context(|| format!("extraction service at {url} is unreachable"))?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string()?;
        ensure!(status == 200, "{url} answered HTTP {status}");
        serde_json::from_str(&body).with_context(|| format!("{url}: malformed health response"))
    }

    fn call(&self, texts: &[&str]) -> Result<Vec<Pairs>> {
        let body = serde_json::json!({ "texts": texts });
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json")
            .send(body.to_string())
            .with_context(|| format!("extraction service at {} is unreachable", self.endpoint))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string()?;
        match status {
            200 => {}
            413 if texts.len() > 1 => {
                let (a, b) = texts.split_at(texts.len() / 2);
                let mut out = self.call(a)?;
                out.extend(self.call(b)?);
                return Ok(out);
            }
            400 => bail!("extraction service rejected the request body (400): {}", snippet(&text)),
            413 => bail!("extraction service rejected a single text as too large (413)"),
            _ => bail!("extraction service failed (HTTP {status}): {}", snippet(&text)),
        }
        let parsed: RemoteResponse =
            serde_json::from_str(&text).context("extraction service response violates the wire schema")?;
        ensure!(
            parsed.results.len() == texts.len(),
            "extraction service returned {} results for {} texts",
            parsed.results.len(),
            texts.len()
        );
        parsed
            .results
            .into_iter()
            .map(|r| from_wire(r).context("extraction service response violates the wire schema"))
            .collect()
    }
}

fn snippet(s: &str) -> String {
    s.chars().take(300).collect()
}

impl Extractor for RemoteExtractor {
    fn id(&self) -> String {
        format!("remote:{}", self.endpoint)
    }

    fn preflight(&self) -> Result<()> {
        let h = self.health()?;
        log::info!("extraction service model {}", h.model_version);
        Ok(())
    }

    fn extract(&self, texts: &[&str]) -> Result<Vec<Option<Pairs>>> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch) {
            out.extend(self.call(chunk)?.into_iter().map(Some));
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------- prompt

const PROMPT: &str = "Extract the aspects of the movie discussed in the text below and the sentiment expressed toward each. \
Reply with only a JSON array of objects with the keys \"aspect\" and \"sentiment\", where sentiment is \"positive\", \"negative\" or \"neutral\". \
Reply [] when no aspect is discussed.\nText: ";

/// Asks the configured model for JSON pairs. Replies are parsed strictly;
/// an unparseable reply is retried once with a fresh nonce.
pub struct PromptExtractor {
    gateway: Arc<Gateway>,
}

impl PromptExtractor {
    pub fn new(gateway: Arc<Gateway>) -> Self {
        PromptExtractor { gateway }
    }

    pub fn prompt(text: &str) -> String {
        format!("{PROMPT}{text}")
    }

    /// Strict reading of a reply: a JSON array of pairs, optionally inside
    /// a single code fence.
    pub fn parse_reply(raw: &str) -> Option<Pairs> {
        let mut s = raw.trim();
        if let Some(inner) = s.strip_prefix("```") {
            let inner = inner.strip_prefix("json").unwrap_or(inner);
            s = inner.strip_suffix("```")?.trim();
        }
        let pairs: Vec<WirePair> = serde_json::from_str(s).ok()?;
        from_wire(pairs).ok()
    }

    fn round(&self, texts: &[&str], pending: &[usize], nonce: u64) -> Result<Vec<Option<Pairs>>> {
        let requests: Vec<CompletionRequest> = pending
            .iter()
            .map(|&i| CompletionRequest::new(format!("absa:{i}"), Self::prompt(texts[i]), nonce))
            .collect();
        let results = self
            .gateway
            .complete_all(&requests)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        Ok(results
            .into_iter()
            .map(|r| r.ok().and_then(|reply| Self::parse_reply(&reply.raw_text)))
            .collect())
    }
}

impl Extractor for PromptExtractor {
    fn id(&self) -> String {
        format!("prompt:{}", self.gateway.info().model)
    }

    fn extract(&self, texts: &[&str]) -> Result<Vec<Option<Pairs>>> {
        let all: Vec<usize> = (0..texts.len()).collect();
        let mut out = self.round(texts, &all, 0)?;
        let retry: Vec<usize> = all.into_iter().filter(|&i| out[i].is_none()).collect();
        if !retry.is_empty() {
            for (i, r) in retry.iter().zip(self.round(texts, &retry, 1)?) {
                out[*i] = r;
            }
        }
        Ok(out)
    }
}

pub fn extractor_from_config(cfg: &AbsaConfig, gateway: &Arc<Gateway>) -> Result<Arc<dyn Extractor>> {
    Ok(match &cfg.kind {
        AbsaKind::Lexicon => Arc::new(LexiconExtractor),
        AbsaKind::Fixture { path } => Arc::new(FixtureExtractor::load(path)?),
        AbsaKind::Remote { endpoint, timeout_secs } => Arc::new(RemoteExtractor::new(
            endpoint.clone(),
            Duration::from_secs(*timeout_secs),
        )),
        AbsaKind::Prompt => Arc::new(PromptExtractor::new(gateway.clone())),
    })
}
