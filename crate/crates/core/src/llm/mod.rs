//! Prompt construction, text-generation backends, the explanation cache and
//! the batch generator that turns interaction records into contrastive
//! explanation pairs.

mod backend;
mod cache;
mod generate;
mod prompts;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use backend::{build_backend, generate, Backend, FnBackend, HttpBackend, StubBackend};
pub use cache::{CacheEntry, ExplanationCache};
pub use generate::{
    augment_profiles, generate_explanations, record_prompt, BatchOutcome, ExplanationGenerator,
    ExplanationPair, PendingJob,
};
pub use prompts::{
    build_explanation_prompt, build_profile_prompt, parse_explanation_prompt, parse_profile_prompt,
    PromptTemplate, HISTORY_SEPARATOR, NONE_PLACEHOLDER,
};

/// Generated texts are cut to this many words, matching the AutoEncoder's
/// default sequence length.
pub const MAX_EXPLANATION_WORDS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Product,
    Movie,
    Restaurant,
    Hotel,
}

impl Domain {
    pub const ALL: [Domain; 4] = [Domain::Product, Domain::Movie, Domain::Restaurant, Domain::Hotel];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Product => "product",
            Domain::Movie => "movie",
            Domain::Restaurant => "restaurant",
            Domain::Hotel => "hotel",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Domain::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown domain `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
    Profile,
    Aspect,
    General,
    Summary,
}

impl Polarity {
    pub const ALL: [Polarity; 6] = [
        Polarity::Positive,
        Polarity::Negative,
        Polarity::Profile,
        Polarity::Aspect,
        Polarity::General,
        Polarity::Summary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Profile => "profile",
            Polarity::Aspect => "aspect",
            Polarity::General => "general",
            Polarity::Summary => "summary",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Polarity::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown polarity `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Stub,
    Http,
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stub" => Ok(BackendKind::Stub),
            "http" => Ok(BackendKind::Http),
            _ => Err(Error::validation(format!("unknown backend `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub model_name: Option<String>,
    pub timeout_secs: f64,
    pub max_concurrency: usize,
    pub retry_count: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Stub,
            endpoint: None,
            model_name: None,
            timeout_secs: 60.0,
            max_concurrency: 4,
            retry_count: 2,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_concurrency == 0 {
            return Err(Error::validation("max_concurrency must be at least 1"));
        }
        if self.kind == BackendKind::Http && self.endpoint.as_deref().unwrap_or("").is_empty() {
            return Err(Error::validation("http backend requires an endpoint"));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(Error::validation("timeout must be positive"));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

/// Hex SHA-256 of a rendered prompt.
pub fn fingerprint(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Keeps the first `max_words` whitespace-separated words.
pub fn truncate_words(text: &str, max_words: usize) -> String {
    text.split_whitespace()
        .take(max_words)
        .collect::<Vec<_>>()
        .join(" ")
}
