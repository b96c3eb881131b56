//! Chat-completion client with a live OpenAI-compatible backend and a
//! deterministic replay backend keyed by request digest.

mod http;
mod replay;

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use http::{HttpBackend, HttpConfig, API_KEY_ENV};
pub use replay::{record_fixture, FixtureStore, RecordingBackend, ReplayBackend};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub stage_tag: String,
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl CompletionRequest {
    pub const DEFAULT_MAX_TOKENS: u32 = 2048;

    pub fn new(stage_tag: &str, system_text: &str, user_text: &str) -> Self {
        CompletionRequest {
            stage_tag: stage_tag.to_string(),
            system_text: system_text.to_string(),
            user_text: user_text.to_string(),
            temperature: 0.0,
            max_tokens: Self::DEFAULT_MAX_TOKENS,
        }
    }

    /// Hex SHA-256 over the stage tag, system text and user text. Each part is
    /// length-prefixed so that shifting text between parts changes the digest.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for part in [&self.stage_tag, &self.system_text, &self.user_text] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.user_text.trim().is_empty() {
            return Err(LlmError::InvalidRequest("user_text is empty".into()));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no recorded response for digest {digest} (stage {stage})")]
    FixtureMiss { digest: String, stage: String },
    #[error("rate limited{}", retry_after.map(|d| format!(", retry after {}s", d.as_secs())).unwrap_or_default())]
    RateLimited { retry_after: Option<Duration> },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid fixture: {0}")]
    InvalidFixture(String),
    #[error("fixture store I/O failure: {0}")]
    Io(String),
}

/// A chat-completion provider. Implementations must be safe to call concurrently.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError>;
}

impl<B: LlmBackend + ?Sized> LlmBackend for Box<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for std::sync::Arc<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

/// Backend answering from a closure; used for scripted responders in tests and tooling.
pub struct FnBackend<F>(pub F);

impl<F> LlmBackend for FnBackend<F>
where
    F: Fn(&CompletionRequest) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        (self.0)(request)
    }
}

/// Counting semaphore bounding the number of requests in flight.
#[derive(Debug)]
pub struct Semaphore {
    permits: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Semaphore {
            permits: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.permits.lock().unwrap_or_else(|e| e.into_inner());
        *n += 1;
        self.0.freed.notify_one();
    }
}

/// Default cap on in-flight requests.
pub const DEFAULT_MAX_CONCURRENT: usize = 4;

/// Wraps a backend with an in-flight request cap.
pub struct Throttled<B> {
    inner: B,
    gate: Semaphore,
}

impl<B: LlmBackend> Throttled<B> {
    pub fn new(inner: B, max_concurrent: usize) -> Self {
        Throttled {
            inner,
            gate: Semaphore::new(max_concurrent),
        }
    }
}

impl<B: LlmBackend> LlmBackend for Throttled<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let _permit = self.gate.acquire();
        self.inner.complete(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn digest_depends_only_on_texts() {
        let a = CompletionRequest::new("T1", "sys", "user");
        let mut b = a.clone();
        b.temperature = 0.7;
        b.max_tokens = 10;
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), CompletionRequest::new("T1", "sysu", "ser").digest());
        assert_ne!(a.digest(), CompletionRequest::new("T2", "sys", "user").digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn empty_user_text_is_invalid() {
        assert!(CompletionRequest::new("T1", "s", "  ").validate().is_err());
    }

    #[test]
    fn throttle_caps_in_flight_requests() {
        let current = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let (c, p) = (current.clone(), peak.clone());
        let backend = Arc::new(Throttled::new(
            FnBackend(move |_: &CompletionRequest| {
                let now = c.fetch_add(1, Ordering::SeqCst) + 1;
                p.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(10));
                c.fetch_sub(1, Ordering::SeqCst);
                Ok("ok".to_string())
            }),
            2,
        ));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let b = backend.clone();
                std::thread::spawn(move || b.complete(&CompletionRequest::new("T", "s", "u")).unwrap())
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
