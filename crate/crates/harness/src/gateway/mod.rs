//! Text-in/text-out access to simulators: retries with backoff, a
//! content-addressed cache, and a bounded worker pool that returns results
//! in input order.

mod cache;
pub(crate) mod http;
mod replay;
mod testing;

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use cache::ResponseCache;
pub use http::HttpBackend;
pub(crate) use http::{agent as http_agent, credential};
pub use replay::{ReplayBackend, ReplayEntry};
pub use testing::{FlakyBackend, ScriptedBackend};

use crate::config::{BackendConfig, BackendKind};
use crate::io::sha256_hex;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionRequest {
    pub case_id: String,
    pub prompt: String,
    /// Per-case nonce; identical prompts with different nonces are
    /// independent samples.
    pub nonce: u64,
}

impl CompletionRequest {
    pub fn new(case_id: impl Into<String>, prompt: impl Into<String>, nonce: u64) -> Self {
        CompletionRequest {
            case_id: case_id.into(),
            prompt: prompt.into(),
            nonce,
        }
    }

    /// Model-independent key used by replay fixtures.
    pub fn replay_key(&self) -> String {
        replay_key(&self.prompt, self.nonce)
    }

    pub fn prompt_sha256(&self) -> String {
        sha256_hex(&self.prompt)
    }
}

pub fn replay_key(prompt: &str, nonce: u64) -> String {
    sha256_hex(format!("{prompt}\u{0}{nonce}"))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    /// Worth retrying: timeouts, rate limits, server errors.
    #[error("transient backend error: {0}")]
    Transient(String),
    /// This request cannot succeed; the case fails.
    #[error("{0}")]
    Permanent(String),
    /// Credentials or configuration are wrong; nothing can succeed.
    #[error("backend configuration error: {0}")]
    Fatal(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendInfo {
    pub kind: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub sampling: serde_json::Value,
}

pub trait Backend: Send + Sync {
    fn info(&self) -> BackendInfo;

    /// Checks credentials and configuration before any case runs.
    fn preflight(&self) -> Result<(), BackendError> {
        Ok(())
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;

    /// Offline backends whose replies never vary; their latency is not
    /// recorded so run directories stay byte-identical.
    fn is_deterministic(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulatorReply {
    pub case_id: String,
    /// Exactly as returned by the backend.
    pub raw_text: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
    pub retries: u32,
    pub cache_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseFailure {
    pub case_id: String,
    pub error: String,
    pub retries: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{case_id}: {message}")]
pub struct FatalError {
    pub case_id: String,
    pub message: String,
}

pub type CallResult = Result<SimulatorReply, CaseFailure>;

/// One line of the request/response audit log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplyLogEntry {
    pub case_id: String,
    pub key: String,
    pub prompt_sha256: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
    pub retries: u32,
    pub cache_hit: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ReplyLogEntry {
    pub fn new(request: &CompletionRequest, model: &str, result: &CallResult) -> Self {
        let base = ReplyLogEntry {
            case_id: request.case_id.clone(),
            key: request.replay_key(),
            prompt_sha256: request.prompt_sha256(),
            model: model.to_string(),
            raw_text: None,
            latency_ms: None,
            retries: 0,
            cache_hit: false,
            error: None,
        };
        match result {
            Ok(r) => ReplyLogEntry {
                raw_text: Some(r.raw_text.clone()),
                latency_ms: r.latency_ms,
                retries: r.retries,
                cache_hit: r.cache_hit,
                ..base
            },
            Err(f) => ReplyLogEntry {
                retries: f.retries,
                error: Some(f.error.clone()),
                ..base
            },
        }
    }
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

pub struct Gateway {
    backend: Arc<dyn Backend>,
    info: BackendInfo,
    max_retries: u32,
    max_in_flight: usize,
    backoff: Duration,
    cache: Option<ResponseCache>,
    sleep: Sleeper,
}

const MAX_BACKOFF: Duration = Duration::from_secs(60);

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        let info = backend.info();
        Gateway {
            backend,
            info,
            max_retries: 3,
            max_in_flight: 1,
            backoff: Duration::from_millis(500),
            cache: None,
            sleep: Arc::new(std::thread::sleep),
        }
    }

    /// Builds the backend named by `cfg` and wraps it.
    pub fn from_config(cfg: &BackendConfig) -> anyhow::Result<Self> {
        let backend: Arc<dyn Backend> = match cfg.kind {
            BackendKind::Http => Arc::new(HttpBackend::from_config(cfg)?),
            BackendKind::Replay => Arc::new(ReplayBackend::from_config(cfg)?),
        };
        let mut gw = Gateway::new(backend)
            .with_retries(cfg.max_retries)
            .with_max_in_flight(cfg.max_in_flight)
            .with_backoff(Duration::from_millis(cfg.backoff_ms));
        if let Some(dir) = &cfg.cache_dir {
            gw = gw.with_cache(ResponseCache::new(dir));
        }
        Ok(gw)
    }

    pub fn with_retries(mut self, n: u32) -> Self {
        self.max_retries = n;
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    pub fn with_backoff(mut self, base: Duration) -> Self {
        self.backoff = base;
        self
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    /// Replaces the backoff sleep, e.g. with a recorder in tests.
    pub fn with_sleeper(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Arc::new(sleep);
        self
    }

    pub fn info(&self) -> &BackendInfo {
        &self.info
    }

    pub fn backend(&self) -> &Arc<dyn Backend> {
        &self.backend
    }

    pub fn preflight(&self) -> Result<(), BackendError> {
        self.backend.preflight()
    }

    /// Cache key: model identity, sampling parameters, prompt and nonce.
    pub fn cache_key(&self, request: &CompletionRequest) -> String {
        let material = serde_json::json!({
            "kind": self.info.kind,
            "model": self.info.model,
            "endpoint": self.info.endpoint,
            "sampling": self.info.sampling,
            "prompt": request.prompt,
            "nonce": request.nonce,
        });
        sha256_hex(material.to_string())
    }

    /// One request with retries. `Err(Ok(..))` is a failed case,
    /// `Err(Err(..))` a fatal error.
    pub fn complete(&self, request: &CompletionRequest) -> Result<SimulatorReply, Result<CaseFailure, FatalError>> {
        let key = self.cache.as_ref().map(|_| self.cache_key(request));
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            match cache.get(key) {
                Ok(Some(text)) => {
                    return Ok(SimulatorReply {
                        case_id: request.case_id.clone(),
                        raw_text: text,
                        model: self.info.model.clone(),
                        latency_ms: None,
                        retries: 0,
                        cache_hit: true,
                    })
                }
                Ok(None) => {}
                Err(e) => log::warn!("cache read for {} failed: {e:#}", request.case_id),
            }
        }
        let mut retries = 0;
        loop {
            let started = Instant::now();
            match self.backend.complete(request) {
                Ok(text) => {
                    let latency_ms = (!self.backend.is_deterministic()).then(|| started.elapsed().as_millis() as u64);
                    if let (Some(cache), Some(key)) = (&self.cache, &key) {
                        if let Err(e) = cache.put(key, &text) {
                            log::warn!("cache write for {} failed: {e:#}", request.case_id);
                        }
                    }
                    return Ok(SimulatorReply {
                        case_id: request.case_id.clone(),
                        raw_text: text,
                        model: self.info.model.clone(),
                        latency_ms,
                        retries,
                        cache_hit: false,
                    });
                }
                Err(BackendError::Transient(msg)) if retries < self.max_retries => {
                    let delay = self.backoff.saturating_mul(1 << retries.min(16)).min(MAX_BACKOFF);
                    log::debug!("{}: {msg}; retry {} in {delay:?}", request.case_id, retries + 1);
                    (self.sleep)(delay);
                    retries += 1;
                }
                Err(BackendError::Fatal(message)) => {
                    return Err(Err(FatalError {
                        case_id: request.case_id.clone(),
                        message,
                    }))
                }
                Err(e) => {
                    return Err(Ok(CaseFailure {
                        case_id: request.case_id.clone(),
                        error: e.to_string(),
                        retries,
                    }))
                }
            }
        }
    }

    /// Runs every request on at most `max_in_flight` workers. Results come
    /// back in input order regardless of completion order. A fatal error
    /// stops the pool.
    pub fn complete_all(&self, requests: &[CompletionRequest]) -> Result<Vec<CallResult>, FatalError> {
        let slots: Vec<Mutex<Option<CallResult>>> = requests.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let stop = AtomicBool::new(false);
        let fatal: Mutex<Option<FatalError>> = Mutex::new(None);
        let workers = self.max_in_flight.min(requests.len()).max(1);
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= requests.len() {
                        break;
                    }
                    match self.complete(&requests[i]) {
                        Ok(r) => *slots[i].lock().unwrap() = Some(Ok(r)),
                        Err(Ok(f)) => *slots[i].lock().unwrap() = Some(Err(f)),
                        Err(Err(e)) => {
                            stop.store(true, Ordering::SeqCst);
                            fatal.lock().unwrap().get_or_insert(e);
                            break;
                        }
                    }
                });
            }
        });
        if let Some(e) = fatal.into_inner().unwrap() {
            return Err(e);
        }
        Ok(slots
            .into_iter()
            .map(|m| m.into_inner().unwrap().expect("every request was answered"))
            .collect())
    }
}
