//! Text-generation backends and sampling campaigns.
//!
//! A backend turns a prompt plus sampling parameters into a continuation.
//! [`MockBackend`] produces seeded markup with configurable defects so the
//! curation pipeline can be exercised offline; [`RemoteBackend`] talks to a
//! completion-style HTTP endpoint.

mod campaign;
mod config;
mod mock;
mod remote;

pub use campaign::{
    read_raw_samples, run_campaign, run_campaign_to_file, run_campaign_to_vec, CampaignError,
    CampaignOptions, CampaignOutcome, CampaignSpec, CampaignStage, SampleFailure,
};
pub use config::{BackendKind, CampaignConfig, RemoteSection, StageConfig};
pub use mock::{MockBackend, MockProfile};
pub use remote::{RemoteBackend, RemoteConfig, RetryPolicy, API_KEY_ENV};

use crate::sampling::SamplingParams;

#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a str,
    pub params: SamplingParams,
    /// Global index of the sample this request produces.
    pub sample_index: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    /// Retries exhausted on connection errors, timeouts, 429 or 5xx.
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    /// The endpoint refused this request (4xx other than auth); not retried.
    #[error("request rejected with status {status}: {message}")]
    Rejected { status: u16, message: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    /// A response arrived but did not carry `choices[0].text`.
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("backend misconfigured: {0}")]
    Config(String),
}

impl BackendError {
    /// Fatal errors abort a campaign; the rest only cost one sample.
    pub fn is_fatal(&self) -> bool {
        matches!(self, BackendError::Auth(_) | BackendError::Config(_))
    }
}

pub trait CompletionBackend: Sync {
    fn id(&self) -> &str;

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}
