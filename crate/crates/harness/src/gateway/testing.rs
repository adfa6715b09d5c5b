//! In-process backends for tests, fixture recording and fault injection.

use std::collections::HashMap;
use std::sync::Mutex;

use super::{Backend, BackendError, BackendInfo, CompletionRequest};

type Script = Box<dyn Fn(&CompletionRequest) -> Result<String, BackendError> + Send + Sync>;

/// Answers with a function of the request.
pub struct ScriptedBackend {
    model: String,
    script: Script,
}

impl ScriptedBackend {
    pub fn new(
        model: impl Into<String>,
        script: impl Fn(&CompletionRequest) -> Result<String, BackendError> + Send + Sync + 'static,
    ) -> Self {
        ScriptedBackend {
            model: model.into(),
            script: Box::new(script),
        }
    }

    /// Always answers `text`.
    pub fn constant(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::new("constant", move |_| Ok(text.clone()))
    }
}

impl Backend for ScriptedBackend {
    fn info(&self) -> BackendInfo {
        BackendInfo {
            kind: "scripted".into(),
            model: self.model.clone(),
            endpoint: None,
            sampling: serde_json::Value::Null,
        }
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (self.script)(request)
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Fails the first `failures` calls of every case with `error`, then
/// delegates.
pub struct FlakyBackend<B> {
    inner: B,
    failures: u32,
    error: BackendError,
    calls: Mutex<HashMap<String, u32>>,
}

impl<B: Backend> FlakyBackend<B> {
    pub fn new(inner: B, failures: u32, error: BackendError) -> Self {
        FlakyBackend {
            inner,
            failures,
            error,
            calls: Mutex::new(HashMap::new()),
        }
    }

    pub fn calls(&self, case_id: &str) -> u32 {
        self.calls.lock().unwrap().get(case_id).copied().unwrap_or(0)
    }
}

impl<B: Backend> Backend for FlakyBackend<B> {
    fn info(&self) -> BackendInfo {
        self.inner.info()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let n = {
            let mut calls = self.calls.lock().unwrap();
            let n = calls.entry(request.case_id.clone()).or_insert(0);
            *n += 1;
            *n
        };
        if n <= self.failures {
            return Err(self.error.clone());
        }
        self.inner.complete(request)
    }

    fn is_deterministic(&self) -> bool {
        self.inner.is_deterministic()
    }
}
