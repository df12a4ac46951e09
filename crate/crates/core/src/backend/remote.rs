use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendError, CompletionBackend, CompletionRequest};

/// Environment variable holding the bearer token for the completion endpoint.
pub const API_KEY_ENV: &str = "SYNTHNER_API_KEY";

/// Exponential backoff without jitter: `initial * 2^(attempt-1)`, capped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            initial_backoff: Duration::from_secs(1),
            max_backoff: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.initial_backoff
            .checked_mul(factor)
            .unwrap_or(self.max_backoff)
            .min(self.max_backoff)
    }
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub url: String,
    pub model: Option<String>,
    pub api_key: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl RemoteConfig {
    /// Build a config whose credential comes from [`API_KEY_ENV`].
    pub fn from_env(url: impl Into<String>, model: Option<String>) -> Result<Self, BackendError> {
        let api_key = std::env::var(API_KEY_ENV)
            .map_err(|_| BackendError::Auth(format!("{API_KEY_ENV} is not set")))?;
        Ok(RemoteConfig {
            url: url.into(),
            model,
            api_key,
            timeout: Duration::from_secs(600),
            retry: RetryPolicy::default(),
        })
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<&'a str>,
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
    top_p: f64,
    n: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    text: String,
}

/// Client for a completion-style endpoint taking
/// `{"prompt", "max_tokens", "temperature", "top_p", "n": 1}` and answering
/// `{"choices": [{"text": ...}]}`.
pub struct RemoteBackend {
    id: String,
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(id: impl Into<String>, config: RemoteConfig) -> Result<Self, BackendError> {
        if config.api_key.is_empty() {
            return Err(BackendError::Auth("empty API key".into()));
        }
        if config.retry.max_attempts == 0 {
            return Err(BackendError::Config("max_attempts must be at least 1".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Ok(RemoteBackend {
            id: id.into(),
            config,
            agent,
        })
    }

    fn attempt(&self, body: &str) -> Attempt {
        let sent = self
            .agent
            .post(&self.config.url)
            .header("Authorization", format!("Bearer {}", self.config.api_key))
            .header("Content-Type", "application/json")
            .send(body);
        let mut response = match sent {
            Ok(r) => r,
            Err(e @ ureq::Error::BadUri(_)) => {
                return Attempt::Done(Err(BackendError::Config(e.to_string())))
            }
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) if status == 200 => {
                return Attempt::Done(Err(BackendError::Malformed(e.to_string())))
            }
            Err(_) => String::new(),
        };
        match status {
            200..=299 => Attempt::Done(parse_completion(&text)),
            401 | 403 => Attempt::Done(Err(BackendError::Auth(format!("status {status}")))),
            408 | 429 | 500..=599 => Attempt::Retry(format!("status {status}")),
            _ => Attempt::Done(Err(BackendError::Rejected {
                status,
                message: truncate(&text, 200),
            })),
        }
    }
}

enum Attempt {
    Done(Result<String, BackendError>),
    Retry(String),
}

fn parse_completion(body: &str) -> Result<String, BackendError> {
    let parsed: WireResponse =
        serde_json::from_str(body).map_err(|e| BackendError::Malformed(e.to_string()))?;
    parsed
        .choices
        .into_iter()
        .next()
        .map(|c| c.text)
        .ok_or_else(|| BackendError::Malformed("no choices in response".into()))
}

fn truncate(text: &str, max: usize) -> String {
    text.chars().take(max).collect()
}

impl CompletionBackend for RemoteBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let body = serde_json::to_string(&WireRequest {
            model: self.config.model.as_deref(),
            prompt: request.prompt,
            max_tokens: request.params.max_tokens,
            temperature: request.params.temperature,
            top_p: request.params.top_p,
            n: 1,
        })
        .expect("request serializes");

        let retry = self.config.retry;
        let mut last = String::new();
        for attempt in 1..=retry.max_attempts {
            match self.attempt(&body) {
                Attempt::Done(result) => return result,
                Attempt::Retry(reason) => last = reason,
            }
            if attempt < retry.max_attempts {
                std::thread::sleep(retry.backoff(attempt));
            }
        }
        Err(BackendError::Transport {
            attempts: retry.max_attempts,
            message: last,
        })
    }
}
