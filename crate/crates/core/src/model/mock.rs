//! Scripted backend driven by a JSON fixture.
//!
//! Answers are looked up by (prompt kind, digest of the first attached image).
//! Requests without images, or with an unmapped digest, fall back to the
//! per-kind default. A missing default is an error rather than a guess.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendKind, ModelError, ModelRequest};
use crate::prompts::PromptKind;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockDefaults {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
}

impl MockDefaults {
    fn for_kind(&self, kind: PromptKind) -> Option<&str> {
        match kind {
            PromptKind::Content => self.content.as_deref(),
            PromptKind::Intensity => self.intensity.as_deref(),
            PromptKind::Rating => self.rating.as_deref(),
            PromptKind::Caption => self.caption.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockAnswer {
    pub digest: String,
    pub kind: PromptKind,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockFixture {
    #[serde(default)]
    pub defaults: MockDefaults,
    #[serde(default)]
    pub answers: Vec<MockAnswer>,
}

impl MockFixture {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("fixture serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug)]
pub struct MockBackend {
    defaults: MockDefaults,
    answers: HashMap<(PromptKind, String), String>,
}

impl MockBackend {
    pub fn new(fixture: MockFixture) -> Result<Self, ModelError> {
        let mut answers = HashMap::new();
        for answer in fixture.answers {
            let key = (answer.kind, answer.digest.to_ascii_lowercase());
            if answers.insert(key, answer.text).is_some() {
                return Err(ModelError::MalformedFixture(format!(
                    "duplicate {} answer for digest {}",
                    answer.kind.as_str(),
                    answer.digest
                )));
            }
        }
        Ok(Self {
            defaults: fixture.defaults,
            answers,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let fixture: MockFixture =
            serde_json::from_str(text).map_err(|e| ModelError::MalformedFixture(e.to_string()))?;
        Self::new(fixture)
    }
}

/// Build a mock backend from a fixture file.
pub fn mock_from_fixture(path: &Path) -> Result<MockBackend, ModelError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModelError::MalformedFixture(format!("cannot read {}: {e}", path.display())))?;
    MockBackend::from_json(&text)
}

impl Backend for MockBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Mock
    }

    fn call(&self, request: &ModelRequest) -> Result<String, ModelError> {
        let kind = request.prompt.kind;
        let digest = request.images.first().map(|i| i.bytes_digest.to_ascii_lowercase());
        if let Some(d) = &digest {
            if let Some(text) = self.answers.get(&(kind, d.clone())) {
                return Ok(text.clone());
            }
        }
        self.defaults
            .for_kind(kind)
            .map(str::to_string)
            .ok_or_else(|| ModelError::NoAnswerScripted {
                kind: kind.as_str().to_string(),
                digest: digest.unwrap_or_else(|| "<no image>".into()),
            })
    }
}
