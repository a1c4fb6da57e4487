//! OpenAI-compatible chat-completions backend.

use std::time::Duration;

use serde_json::{json, Value};

use super::{Backend, BackendKind, ModelError, ModelRequest};

pub const API_KEY_ENV: &str = "MATURITY_RATER_API_KEY";

#[derive(Debug)]
pub struct HttpBackend {
    endpoint: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(base_url: &str, api_key: impl Into<String>) -> Result<Self, ModelError> {
        Self::with_timeout(base_url, api_key, Duration::from_secs(120))
    }

    pub fn with_timeout(base_url: &str, api_key: impl Into<String>, timeout: Duration) -> Result<Self, ModelError> {
        let api_key = api_key.into();
        if api_key.trim().is_empty() {
            return Err(ModelError::Auth("empty API key".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ModelError::Transport {
                message: e.to_string(),
                transient: false,
            })?;
        Ok(Self {
            endpoint: format!("{}/v1/chat/completions", base_url.trim_end_matches('/')),
            api_key,
            client,
        })
    }

    /// Credential from `MATURITY_RATER_API_KEY`.
    pub fn from_env(base_url: &str) -> Result<Self, ModelError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| ModelError::Auth(format!("{API_KEY_ENV} is not set")))?;
        Self::new(base_url, key)
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

/// JSON body for one request.
pub fn request_body(request: &ModelRequest) -> Value {
    let mut content = vec![json!({ "type": "text", "text": request.prompt.text })];
    for image in &request.images {
        content.push(json!({
            "type": "image_url",
            "image_url": { "url": image.data_url() },
        }));
    }
    json!({
        "model": request.model_id,
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
        "messages": [{ "role": "user", "content": content }],
    })
}

/// Text of `choices[0].message.content`, accepting either a string or a list
/// of text parts.
pub fn response_text(body: &Value) -> Result<String, ModelError> {
    let content = body
        .pointer("/choices/0/message/content")
        .ok_or_else(|| ModelError::MalformedResponse("missing choices[0].message.content".into()))?;
    match content {
        Value::String(s) => Ok(s.clone()),
        Value::Array(parts) => Ok(parts
            .iter()
            .filter_map(|p| p.get("text").and_then(Value::as_str))
            .collect::<Vec<_>>()
            .join("")),
        Value::Null => Ok(String::new()),
        other => Err(ModelError::MalformedResponse(format!(
            "unexpected content type: {other}"
        ))),
    }
}

impl Backend for HttpBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Http
    }

    fn call(&self, request: &ModelRequest) -> Result<String, ModelError> {
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&request_body(request))
            .send()
            .map_err(|e| ModelError::Transport {
                message: e.to_string(),
                transient: true,
            })?;
        let status = resp.status();
        let text = resp.text().unwrap_or_default();
        match status.as_u16() {
            200..=299 => {
                let body: Value =
                    serde_json::from_str(&text).map_err(|e| ModelError::MalformedResponse(e.to_string()))?;
                response_text(&body)
            }
            401 | 403 => Err(ModelError::Auth(format!("HTTP {status}: {}", snippet(&text)))),
            429 => Err(ModelError::RateLimited { attempts: 1 }),
            408 | 500..=599 => Err(ModelError::Transport {
                message: format!("HTTP {status}: {}", snippet(&text)),
                transient: true,
            }),
            _ => Err(ModelError::Transport {
                message: format!("HTTP {status}: {}", snippet(&text)),
                transient: false,
            }),
        }
    }
}

fn snippet(text: &str) -> String {
    text.chars().take(200).collect()
}
