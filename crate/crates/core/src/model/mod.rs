//! Multimodal model access.
//!
//! A [`Backend`] answers one request with raw text. [`ModelClient`] wraps a
//! backend with the response cache, retries with exponential backoff, request
//! pacing and refusal detection. Clients are `Sync` and meant to be shared by
//! every worker of a batch run.

mod http;
mod image;
mod limiter;
mod mock;

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::{CacheEntry, CacheError, CacheKey, CacheStore, KeyMaterial};
use crate::prompts::PromptText;

pub use self::http::{request_body, response_text, HttpBackend, API_KEY_ENV};
pub use self::image::{encode_image, file_digest, fitted_dimensions, EncodedImage, ImageError, DEFAULT_MAX_SIDE};
pub use self::limiter::{LimiterConfig, Permit, RateLimiter};
pub use self::mock::{mock_from_fixture, MockAnswer, MockBackend, MockDefaults, MockFixture};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("transport error: {message}")]
    Transport { message: String, transient: bool },
    #[error("model refused the request: {0:?}")]
    Refused(String),
    #[error("no answer scripted for {kind} request (digest {digest})")]
    NoAnswerScripted { kind: String, digest: String },
    #[error("malformed mock fixture: {0}")]
    MalformedFixture(String),
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

impl ModelError {
    /// Errors worth retrying with the identical payload.
    pub fn is_transient(&self) -> bool {
        match self {
            ModelError::RateLimited { .. } => true,
            ModelError::Transport { transient, .. } => *transient,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Mock,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Http => "http",
            BackendKind::Mock => "mock",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub model_id: String,
    pub temperature: f64,
    pub prompt: PromptText,
    pub images: Vec<EncodedImage>,
    pub max_tokens: u32,
}

impl ModelRequest {
    /// Images must be attached exactly when the prompt expects them.
    pub fn validate(&self) -> Result<(), ModelError> {
        match (self.prompt.expects_image, self.images.is_empty()) {
            (true, true) => Err(ModelError::InvalidRequest(format!(
                "{} prompt expects an image but none is attached",
                self.prompt.kind.as_str()
            ))),
            (false, false) => Err(ModelError::InvalidRequest(format!(
                "{} prompt is text-only but {} image(s) are attached",
                self.prompt.kind.as_str(),
                self.images.len()
            ))),
            _ => Ok(()),
        }
    }

    pub fn image_digests(&self) -> Vec<&str> {
        self.images.iter().map(|i| i.bytes_digest.as_str()).collect()
    }

    pub fn cache_key(&self, backend: BackendKind) -> CacheKey {
        let digests = self.image_digests();
        CacheKey::compute(&KeyMaterial {
            backend: backend.as_str(),
            model_id: &self.model_id,
            temperature: self.temperature,
            prompt: &self.prompt.text,
            image_digests: &digests,
            max_tokens: self.max_tokens,
        })
    }

    /// One-line human-readable description.
    pub fn summary(&self) -> String {
        let images: Vec<&str> = self.images.iter().map(EncodedImage::short_digest).collect();
        format!(
            "{} | model {} | {} image(s) [{}] | prompt {} chars",
            self.prompt.kind.as_str(),
            self.model_id,
            self.images.len(),
            images.join(", "),
            self.prompt.text.chars().count()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelResponse {
    pub text: String,
    pub backend: BackendKind,
    pub from_cache: bool,
    pub latency: Duration,
}

/// The model itself: one request in, raw text out.
pub trait Backend: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn call(&self, request: &ModelRequest) -> Result<String, ModelError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(16),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    /// Delay before attempt `attempt + 1` (attempts count from 1).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

const REFUSAL_MARKERS: [&str; 8] = [
    "i can't assist",
    "i cannot assist",
    "i can't help with",
    "i cannot help with",
    "i'm unable to assist",
    "i am unable to assist",
    "i'm not able to help",
    "i won't be able to help",
];

/// Whether a response reads as a safety refusal rather than an answer.
pub fn looks_like_refusal(text: &str) -> bool {
    let lower = text.to_lowercase().replace('\u{2019}', "'");
    REFUSAL_MARKERS.iter().any(|m| lower.contains(m))
        || (lower.starts_with("i'm sorry") && lower.contains("can't"))
        || (lower.starts_with("sorry") && lower.contains("cannot"))
}

pub struct ModelClient {
    backend: Box<dyn Backend>,
    cache: Option<CacheStore>,
    retry: RetryPolicy,
    limiter: RateLimiter,
    backend_calls: AtomicU64,
    cache_hits: AtomicU64,
}

impl std::fmt::Debug for ModelClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelClient")
            .field("backend", &self.backend.kind())
            .field("cache", &self.cache.as_ref().map(|c| c.root().to_path_buf()))
            .field("retry", &self.retry)
            .field("backend_calls", &self.backend_calls())
            .finish()
    }
}

impl ModelClient {
    pub fn new(backend: impl Backend + 'static) -> Self {
        Self::from_boxed(Box::new(backend))
    }

    pub fn from_boxed(backend: Box<dyn Backend>) -> Self {
        Self {
            backend,
            cache: None,
            retry: RetryPolicy::default(),
            limiter: RateLimiter::new(LimiterConfig::default()),
            backend_calls: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        }
    }

    pub fn with_cache(mut self, cache: CacheStore) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_limiter(mut self, config: LimiterConfig) -> Self {
        self.limiter = RateLimiter::new(config);
        self
    }

    pub fn backend_kind(&self) -> BackendKind {
        self.backend.kind()
    }

    /// Number of requests that reached the backend (each retry attempt counts).
    pub fn backend_calls(&self) -> u64 {
        self.backend_calls.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.limiter.max_in_flight()
    }

    /// Evaluate the model on one request.
    pub fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, ModelError> {
        request.validate()?;
        let started = Instant::now();
        let kind = self.backend.kind();
        let key = request.cache_key(kind);

        if let Some(cache) = &self.cache {
            if let Some(entry) = cache.get(&key)? {
                self.cache_hits.fetch_add(1, Ordering::SeqCst);
                return finish(entry.response_text, kind, true, started);
            }
        }

        let text = self.call_with_retry(request)?;
        if text.trim().is_empty() {
            return Err(ModelError::MalformedResponse("empty response text".into()));
        }
        if let Some(cache) = &self.cache {
            let entry = CacheEntry::new(key, text.clone(), &request.model_id, request.summary());
            cache.put(&entry)?;
        }
        finish(text, kind, false, started)
    }

    fn call_with_retry(&self, request: &ModelRequest) -> Result<String, ModelError> {
        let max = self.retry.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            let result = {
                let _permit = self.limiter.acquire();
                self.backend_calls.fetch_add(1, Ordering::SeqCst);
                self.backend.call(request)
            };
            match result {
                Ok(text) => return Ok(text),
                Err(e) if e.is_transient() && attempt < max => {
                    log::warn!("attempt {attempt}/{max} failed ({e}); retrying");
                    std::thread::sleep(self.retry.backoff(attempt));
                    attempt += 1;
                }
                Err(ModelError::RateLimited { .. }) => return Err(ModelError::RateLimited { attempts: attempt }),
                Err(e) => return Err(e),
            }
        }
    }
}

fn finish(text: String, backend: BackendKind, from_cache: bool, started: Instant) -> Result<ModelResponse, ModelError> {
    if looks_like_refusal(&text) {
        return Err(ModelError::Refused(text));
    }
    Ok(ModelResponse {
        text,
        backend,
        from_cache,
        latency: started.elapsed(),
    })
}

/// Convenience for building text-only requests.
pub fn text_request(model_id: &str, prompt: PromptText, temperature: f64, max_tokens: u32) -> ModelRequest {
    ModelRequest {
        model_id: model_id.to_string(),
        temperature,
        prompt,
        images: Vec::new(),
        max_tokens,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicyTable;
    use crate::prompts::{render_caption_prompt, render_content_prompt, render_rating_prompt};
    use std::sync::Mutex;

    fn image(digest: &str) -> EncodedImage {
        EncodedImage {
            media_type: "image/png".into(),
            bytes_digest: digest.into(),
            payload: "AAAA".into(),
            width: 1,
            height: 1,
        }
    }

    fn content_request(digest: &str) -> ModelRequest {
        ModelRequest {
            model_id: "test-model".into(),
            temperature: 0.0,
            prompt: render_content_prompt(&PolicyTable::builtin()),
            images: vec![image(digest)],
            max_tokens: 32,
        }
    }

    /// Fails with the queued errors first, then answers "ok"; records payloads.
    struct Flaky {
        failures: Mutex<Vec<ModelError>>,
        seen: Mutex<Vec<ModelRequest>>,
    }

    impl Backend for Flaky {
        fn kind(&self) -> BackendKind {
            BackendKind::Http
        }
        fn call(&self, request: &ModelRequest) -> Result<String, ModelError> {
            self.seen.lock().unwrap().push(request.clone());
            match self.failures.lock().unwrap().pop() {
                Some(e) => Err(e),
                None => Ok("ok".into()),
            }
        }
    }

    fn flaky(failures: Vec<ModelError>) -> Flaky {
        Flaky {
            failures: Mutex::new(failures),
            seen: Mutex::new(Vec::new()),
        }
    }

    #[test]
    fn mock_lookup_and_defaults() {
        let fixture = r#"{
            "defaults": {"content": "0"},
            "answers": [{"digest": "d1", "kind": "content", "text": "2"}]
        }"#;
        let client = ModelClient::new(MockBackend::from_json(fixture).unwrap());
        assert_eq!(client.complete(&content_request("d1")).unwrap().text, "2");
        assert_eq!(client.complete(&content_request("d9")).unwrap().text, "0");

        let bare = ModelClient::new(
            MockBackend::from_json(r#"{"answers": [{"digest": "d1", "kind": "content", "text": "2"}]}"#).unwrap(),
        );
        let err = bare.complete(&content_request("d9")).unwrap_err();
        assert!(matches!(err, ModelError::NoAnswerScripted { .. }));
        assert!(err.to_string().contains("no answer scripted"));
    }

    #[test]
    fn malformed_fixtures() {
        assert!(matches!(
            MockBackend::from_json("{\"answers\": 3}"),
            Err(ModelError::MalformedFixture(_))
        ));
        assert!(matches!(
            MockBackend::from_json(
                r#"{"answers": [{"digest": "a", "kind": "content", "text": "1"},
                                {"digest": "A", "kind": "content", "text": "2"}]}"#
            ),
            Err(ModelError::MalformedFixture(_))
        ));
        assert!(MockBackend::from_json(r#"{"answers": [{"digest": "a", "kind": "nope", "text": "1"}]}"#).is_err());
    }

    #[test]
    fn cache_hit_skips_backend() {
        let dir = tempfile::tempdir().unwrap();
        let client = ModelClient::new(flaky(vec![])).with_cache(CacheStore::open(dir.path()).unwrap());
        let req = content_request("d1");
        let first = client.complete(&req).unwrap();
        assert!(!first.from_cache);
        let second = client.complete(&req).unwrap();
        assert!(second.from_cache);
        assert_eq!(second.text, first.text);
        assert_eq!(client.backend_calls(), 1);
        assert_eq!(client.cache_hits(), 1);
    }

    #[test]
    fn retries_transient_errors_with_identical_payload() {
        let backend = flaky(vec![
            ModelError::Transport {
                message: "reset".into(),
                transient: true,
            },
            ModelError::RateLimited { attempts: 1 },
        ]);
        let client = ModelClient::new(backend).with_retry(RetryPolicy::no_delay(3));
        let req = content_request("d1");
        assert_eq!(client.complete(&req).unwrap().text, "ok");
        assert_eq!(client.backend_calls(), 3);
    }

    #[test]
    fn gives_up_after_limit() {
        let backend = flaky((0..10).map(|_| ModelError::RateLimited { attempts: 1 }).collect());
        let client = ModelClient::new(backend).with_retry(RetryPolicy::no_delay(3));
        let err = client.complete(&content_request("d1")).unwrap_err();
        assert!(matches!(err, ModelError::RateLimited { attempts: 3 }));
        assert_eq!(client.backend_calls(), 3);
    }

    #[test]
    fn auth_errors_are_not_retried() {
        let backend = flaky(vec![ModelError::Auth("bad key".into())]);
        let client = ModelClient::new(backend).with_retry(RetryPolicy::no_delay(5));
        assert!(matches!(
            client.complete(&content_request("d1")),
            Err(ModelError::Auth(_))
        ));
        assert_eq!(client.backend_calls(), 1);
    }

    #[test]
    fn refusals_surface_distinctly() {
        let fixture = r#"{"defaults": {"content": "I'm sorry, but I can't help with that request."}}"#;
        let client = ModelClient::new(MockBackend::from_json(fixture).unwrap());
        assert!(matches!(
            client.complete(&content_request("d1")),
            Err(ModelError::Refused(_))
        ));
        assert!(!looks_like_refusal("I cannot tell"));
        assert!(!looks_like_refusal("17+"));
        assert!(looks_like_refusal("I can\u{2019}t assist with that."));
    }

    #[test]
    fn request_validation() {
        let mut req = content_request("d1");
        req.images.clear();
        assert!(matches!(req.validate(), Err(ModelError::InvalidRequest(_))));
        let text_only = text_request("m", render_rating_prompt("desc", 0), 0.0, 8);
        assert!(text_only.validate().is_ok());
        let mut caption = text_request("m", render_caption_prompt(), 0.0, 8);
        assert!(caption.validate().is_err());
        caption.images.push(image("d"));
        assert!(caption.validate().is_ok());
    }

    #[test]
    fn key_survives_serialization() {
        let req = content_request("d1");
        let json = serde_json::to_string(&req).unwrap();
        let back: ModelRequest = serde_json::from_str(&json).unwrap();
        assert_eq!(back.cache_key(BackendKind::Mock), req.cache_key(BackendKind::Mock));
        assert_ne!(req.cache_key(BackendKind::Mock), req.cache_key(BackendKind::Http));
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            max_attempts: 6,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(700),
        };
        let delays: Vec<u128> = (1..=5).map(|a| p.backoff(a).as_millis()).collect();
        assert_eq!(delays, vec![100, 200, 400, 700, 700]);
    }
}
