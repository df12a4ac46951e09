use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use super::{
    BackendError, CampaignStage, CompletionBackend, MockBackend, MockProfile, RemoteBackend,
    RemoteConfig, RetryPolicy,
};
use crate::error::{Error, Result};
use crate::sampling::SamplingParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub n_samples: u64,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    /// Falls back to the command-line seed when absent.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteSection {
    pub url: String,
    pub model: Option<String>,
    pub timeout_secs: Option<u64>,
    pub max_attempts: Option<u32>,
    pub initial_backoff_ms: Option<u64>,
    pub max_backoff_ms: Option<u64>,
}

/// Campaign description loaded from TOML.
///
/// ```toml
/// backend = "remote"
/// examples = "prompt_examples.txt"
/// output = "raw.jsonl"
/// concurrency = 2
///
/// [remote]
/// url = "http://localhost:8000/v1/completions"
///
/// [[stages]]
/// n_samples = 1000
/// temperature = 0.8
/// top_p = 0.9
/// max_tokens = 768
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub backend: BackendKind,
    pub backend_id: Option<String>,
    /// Few-shot examples: corpus JSONL, or one encoded sentence per line.
    pub examples: PathBuf,
    pub output: Option<PathBuf>,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    pub stages: Vec<StageConfig>,
    pub remote: Option<RemoteSection>,
    pub mock: Option<MockProfile>,
}

fn default_concurrency() -> usize {
    2
}

impl CampaignConfig {
    pub fn from_toml_str(text: &str, source: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Schema {
            path: source.to_string(),
            line: e
                .span()
                .map(|s| text[..s.start].matches('\n').count() + 1)
                .unwrap_or(0),
            message: e.message().to_string(),
        })
    }

    /// Load a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = CampaignConfig::from_toml_str(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new(""));
        if config.examples.is_relative() {
            config.examples = base.join(&config.examples);
        }
        if let Some(out) = config.output.as_mut() {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(config)
    }

    pub fn total_samples(&self) -> u64 {
        self.stages.iter().map(|s| s.n_samples).sum()
    }

    pub fn stages(&self, default_seed: u64) -> Result<Vec<CampaignStage>> {
        self.stages
            .iter()
            .map(|s| {
                let params = SamplingParams::new(
                    s.temperature,
                    s.top_p,
                    s.max_tokens,
                    s.seed.unwrap_or(default_seed),
                )?;
                Ok(CampaignStage {
                    n_samples: s.n_samples,
                    params,
                })
            })
            .collect()
    }

    pub fn backend_id(&self) -> String {
        if let Some(id) = &self.backend_id {
            return id.clone();
        }
        match self.backend {
            BackendKind::Mock => "mock".to_string(),
            BackendKind::Remote => self
                .remote
                .as_ref()
                .and_then(|r| r.model.clone())
                .unwrap_or_else(|| "remote".to_string()),
        }
    }

    /// Remote settings with the credential taken from the environment.
    pub fn remote_config(&self) -> std::result::Result<RemoteConfig, BackendError> {
        let section = self
            .remote
            .as_ref()
            .ok_or_else(|| BackendError::Config("backend = \"remote\" needs a [remote] section".into()))?;
        let mut config = RemoteConfig::from_env(section.url.clone(), section.model.clone())?;
        let defaults = RetryPolicy::default();
        if let Some(t) = section.timeout_secs {
            config.timeout = Duration::from_secs(t);
        }
        config.retry = RetryPolicy {
            max_attempts: section.max_attempts.unwrap_or(defaults.max_attempts),
            initial_backoff: section
                .initial_backoff_ms
                .map(Duration::from_millis)
                .unwrap_or(defaults.initial_backoff),
            max_backoff: section
                .max_backoff_ms
                .map(Duration::from_millis)
                .unwrap_or(defaults.max_backoff),
        };
        Ok(config)
    }

    pub fn build_backend(&self) -> std::result::Result<Box<dyn CompletionBackend>, BackendError> {
        let id = self.backend_id();
        Ok(match self.backend {
            BackendKind::Mock => Box::new(MockBackend::new(id, self.mock.clone().unwrap_or_default())?),
            BackendKind::Remote => Box::new(RemoteBackend::new(id, self.remote_config()?)?),
        })
    }
}
