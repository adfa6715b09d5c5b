use std::time::Duration;

use anyhow::{Context, Result};
use serde::Deserialize;

use super::{Backend, BackendError, BackendInfo, CompletionRequest};
use crate::config::BackendConfig;

/// Chat-completion endpoint (`POST {"model", "messages", ...}` answering
/// `{"choices": [{"message": {"content": ..}}]}`).
pub struct HttpBackend {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key_env: Option<String>,
    temperature: Option<f64>,
    max_tokens: Option<u32>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

pub(crate) fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(timeout))
        .build()
        .into()
}

/// Reads a credential from the environment; missing or blank is fatal.
pub(crate) fn credential(var: Option<&str>) -> Result<Option<String>, BackendError> {
    let Some(var) = var else { return Ok(None) };
    match std::env::var(var) {
        Ok(v) if !v.trim().is_empty() => Ok(Some(v)),
        _ => Err(BackendError::Fatal(format!("environment variable {var} is not set"))),
    }
}

/// Maps an HTTP status to a retry class.
pub(crate) fn classify(status: u16, body: &str) -> BackendError {
    let snippet: String = body.chars().take(300).collect();
    let msg = format!("HTTP {status}: {snippet}");
    match status {
        401 | 403 => BackendError::Fatal(msg),
        408 | 409 | 425 | 429 | 500..=599 => BackendError::Transient(msg),
        _ => BackendError::Permanent(msg),
    }
}

impl HttpBackend {
    pub fn from_config(cfg: &BackendConfig) -> Result<Self> {
        let endpoint = cfg.endpoint.clone().context("backend.endpoint is required")?;
        Ok(HttpBackend {
            agent: agent(Duration::from_secs(cfg.timeout_secs)),
            endpoint,
            model: cfg.model.clone(),
            api_key_env: cfg.api_key_env.clone(),
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
        })
    }
}

impl Backend for HttpBackend {
    fn info(&self) -> BackendInfo {
        BackendInfo {
            kind: "http".into(),
            model: self.model.clone(),
            endpoint: Some(self.endpoint.clone()),
            sampling: serde_json::json!({ "temperature": self.temperature, "max_tokens": self.max_tokens }),
        }
    }

    fn preflight(&self) -> Result<(), BackendError> {
        credential(self.api_key_env.as_deref())?;
        if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
            return Err(BackendError::Fatal(format!(
                "endpoint {} is not an http(s) URL",
                self.endpoint
            )));
        }
        Ok(())
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let key = credential(self.api_key_env.as_deref())?;
        let mut body = serde_json::json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": request.prompt }],
        });
        // Omitted parameters leave the provider defaults in force.
        if let Some(t) = self.temperature {
            body["temperature"] = t.into();
        }
        if let Some(m) = self.max_tokens {
            body["max_tokens"] = m.into();
        }
        let mut req = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send(body.to_string())
            .map_err(|e| BackendError::Transient(format!("request to {} failed: {e}", self.endpoint)))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transient(format!("reading response: {e}")))?;
        if status != 200 {
            return Err(classify(status, &text));
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::Permanent(format!("malformed response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Permanent("response has no message content".into()))
    }
}
