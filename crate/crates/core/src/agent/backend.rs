//! LM backends: a deterministic scripted backend for tests and pipelines,
//! and a chat-completion HTTP backend configured entirely from the
//! environment.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;
use thiserror::Error;

pub const ENV_ENDPOINT: &str = "DQA_LM_ENDPOINT";
pub const ENV_MODEL: &str = "DQA_LM_MODEL";
pub const ENV_API_KEY: &str = "DQA_LM_API_KEY";
pub const ENV_TIMEOUT_SECS: &str = "DQA_LM_TIMEOUT_SECS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Message {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Message {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Message {
        Message {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("script exhausted at call {0}")]
    ScriptExhausted(usize),
    #[error("backend config: {0}")]
    Config(String),
    #[error("http: {0}")]
    Http(String),
}

/// An ordered message list in, one completion out.
pub trait LmBackend {
    fn complete(&mut self, messages: &[Message]) -> Result<String, BackendError>;
}

/// Script file for the scripted backend.
///
/// Completions resolve per call index: the instance-specific list first,
/// then the `default` list, then `patterns` matched against the latest
/// message. An empty string is a valid completion.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptFile {
    #[serde(default)]
    pub default: Vec<String>,
    #[serde(default)]
    pub instances: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub patterns: Vec<PatternRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRule {
    /// Substring matched against the most recent message.
    pub contains: String,
    pub response: String,
}

impl ScriptFile {
    pub fn load(path: &Path) -> Result<ScriptFile, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))
    }

    /// A fresh session for one instance run.
    pub fn session(&self, instance_id: &str) -> ScriptedBackend {
        let steps = self
            .instances
            .get(instance_id)
            .cloned()
            .unwrap_or_else(|| self.default.clone());
        ScriptedBackend {
            steps,
            patterns: self.patterns.clone(),
            cursor: 0,
        }
    }
}

/// Deterministic backend replaying canned completions.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    steps: Vec<String>,
    patterns: Vec<PatternRule>,
    cursor: usize,
}

impl ScriptedBackend {
    pub fn from_steps<S: Into<String>>(steps: Vec<S>) -> ScriptedBackend {
        ScriptedBackend {
            steps: steps.into_iter().map(Into::into).collect(),
            patterns: Vec::new(),
            cursor: 0,
        }
    }
}

impl LmBackend for ScriptedBackend {
    fn complete(&mut self, messages: &[Message]) -> Result<String, BackendError> {
        let call = self.cursor;
        self.cursor += 1;
        if let Some(step) = self.steps.get(call) {
            return Ok(step.clone());
        }
        let latest = messages.last().map(|m| m.content.as_str()).unwrap_or("");
        for rule in &self.patterns {
            if latest.contains(&rule.contains) {
                return Ok(rule.response.clone());
            }
        }
        Err(BackendError::ScriptExhausted(call))
    }
}

/// Chat-completion HTTP backend. Endpoint, model, and API key come from
/// `DQA_LM_ENDPOINT`, `DQA_LM_MODEL`, and `DQA_LM_API_KEY`; requests run at
/// temperature 0 with a configurable timeout.
pub struct HttpBackend {
    endpoint: String,
    model: String,
    api_key: String,
    timeout: Duration,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn from_env() -> Result<HttpBackend, BackendError> {
        let need = |key: &str| {
            std::env::var(key)
                .ok()
                .filter(|v| !v.is_empty())
                .ok_or_else(|| BackendError::Config(format!("{key} is not set")))
        };
        let endpoint = need(ENV_ENDPOINT)?;
        let model = need(ENV_MODEL)?;
        let api_key = need(ENV_API_KEY)?;
        let timeout = std::env::var(ENV_TIMEOUT_SECS)
            .ok()
            .and_then(|v| v.parse::<u64>().ok())
            .unwrap_or(60);
        Ok(HttpBackend {
            endpoint,
            model,
            api_key,
            timeout: Duration::from_secs(timeout),
            agent: ureq::AgentBuilder::new().build(),
        })
    }
}

impl LmBackend for HttpBackend {
    fn complete(&mut self, messages: &[Message]) -> Result<String, BackendError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": messages,
            "temperature": 0,
        });
        let response = self
            .agent
            .post(&self.endpoint)
            .timeout(self.timeout)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .set("Content-Type", "application/json")
            .send_string(&body.to_string())
            .map_err(|e| BackendError::Http(e.to_string()))?;
        let parsed: serde_json::Value = response
            .into_json()
            .map_err(|e| BackendError::Http(format!("invalid response body: {e}")))?;
        parsed["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| BackendError::Http("response missing choices[0].message.content".into()))
    }
}
