//! Text-generation backends: a deterministic offline stub and a
//! chat-completion HTTP client.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use super::prompts::{parse_explanation_prompt, parse_profile_prompt, HISTORY_SEPARATOR, NONE_PLACEHOLDER};
use super::{fingerprint, truncate_words, BackendConfig, BackendKind, Domain, Polarity, MAX_EXPLANATION_WORDS};
use crate::error::{Error, Result};

pub trait Backend: Send + Sync {
    /// Raw completion for one prompt.
    fn complete(&self, prompt: &str) -> Result<String>;
}

/// Runs the backend and enforces the completion contract: non-empty text cut
/// to [`MAX_EXPLANATION_WORDS`] words.
pub fn generate(backend: &dyn Backend, prompt: &str) -> Result<String> {
    let text = backend.complete(prompt)?;
    let text = truncate_words(&text, MAX_EXPLANATION_WORDS);
    if text.is_empty() {
        return Err(Error::Backend {
            fingerprint: fingerprint(prompt),
            message: "empty completion".into(),
        });
    }
    Ok(text)
}

/// Wraps a closure; handy for replaying fixed completions.
pub struct FnBackend<F>(pub F);

impl<F> Backend for FnBackend<F>
where
    F: Fn(&str) -> Result<String> + Send + Sync,
{
    fn complete(&self, prompt: &str) -> Result<String> {
        (self.0)(prompt)
    }
}

/// Deterministic template backend.
///
/// Explanation prompts are parsed back into history and candidate profiles.
/// With a reason table, item ids found in the profile text are mapped to
/// their planted tokens; otherwise the first word of each side is used.
#[derive(Debug, Clone, Default)]
pub struct StubBackend {
    reason_table: Option<BTreeMap<String, String>>,
    tokens: Vec<String>,
}

impl StubBackend {
    pub fn new(reason_table: Option<BTreeMap<String, String>>) -> Self {
        let tokens = reason_table
            .iter()
            .flat_map(|t| t.values().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        StubBackend {
            reason_table,
            tokens,
        }
    }

    fn words(text: &str) -> impl Iterator<Item = &str> {
        text.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '-'))
            .filter(|w| !w.is_empty())
    }

    fn token_of(&self, text: &str) -> Option<&str> {
        let table = self.reason_table.as_ref()?;
        Self::words(text).find_map(|w| table.get(w).map(String::as_str))
    }

    /// Majority token over history entries, ties to the most recent.
    fn history_token(&self, seq: &str) -> Option<&str> {
        let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for (pos, entry) in seq.split(HISTORY_SEPARATOR).enumerate() {
            if let Some(tok) = self.token_of(entry) {
                let e = counts.entry(tok).or_insert((0, 0));
                e.0 += 1;
                e.1 = pos;
            }
        }
        counts
            .into_iter()
            .max_by_key(|(_, (c, last))| (*c, *last))
            .map(|(t, _)| t)
    }

    fn first_word(text: &str) -> Option<&str> {
        Self::words(text).find(|w| *w != NONE_PLACEHOLDER)
    }

    /// Cyclic successor in the sorted token list.
    fn complement<'a>(&'a self, tok: &'a str) -> &'a str {
        match self.tokens.iter().position(|t| t == tok) {
            Some(i) if self.tokens.len() > 1 => &self.tokens[(i + 1) % self.tokens.len()],
            _ => tok,
        }
    }

    fn explain(&self, domain: Domain, polarity: Polarity, seq: &str, cand: Option<&str>) -> String {
        let cand = cand.unwrap_or("");
        let (verb_pos, verb_neg, noun) = match domain {
            Domain::Product => ("purchased this product", "did not purchase this product", "product"),
            Domain::Movie => ("watched this movie", "did not watch this movie", "movie"),
            Domain::Restaurant => ("visited this restaurant", "did not visit this restaurant", "restaurant"),
            Domain::Hotel => ("stayed at this hotel", "did not stay at this hotel", "hotel"),
        };
        let user_tok = self
            .history_token(seq)
            .or_else(|| Self::first_word(seq))
            .unwrap_or("variety");
        let item_tok = self
            .token_of(cand)
            .or_else(|| Self::first_word(cand))
            .unwrap_or("unknown");
        match polarity {
            Polarity::Positive => format!(
                "The consumer {verb_pos} because the consumer likes {user_tok} and the {noun} is {item_tok}."
            ),
            Polarity::Negative => format!(
                "The consumer {verb_neg} because the consumer likes {} and the {noun} is {}.",
                self.complement(user_tok),
                self.complement(item_tok)
            ),
            Polarity::Aspect => format!("{item_tok}, {noun}, quality"),
            Polarity::General => format!(
                "The consumer may consider this {noun} because the consumer likes {user_tok} and the {noun} is {item_tok}."
            ),
            Polarity::Summary => format!("The consumer prefers {user_tok} options."),
            Polarity::Profile => unreachable!(),
        }
    }
}

impl Backend for StubBackend {
    fn complete(&self, prompt: &str) -> Result<String> {
        if let Some((domain, name)) = parse_profile_prompt(prompt) {
            return Ok(format!(
                "{name} is a {domain} that appeals to consumers who value a dependable experience."
            ));
        }
        if let Some((domain, polarity, seq, cand)) = parse_explanation_prompt(prompt) {
            return Ok(self.explain(domain, polarity, &seq, cand.as_deref()));
        }
        Err(Error::Backend {
            fingerprint: fingerprint(prompt),
            message: "stub backend does not recognise this prompt".into(),
        })
    }
}

/// Chat-completion client: one POST per prompt carrying the model name and a
/// single user message; the reply text is `choices[0].message.content`.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    retries: usize,
    backoff: Duration,
}

impl HttpBackend {
    pub fn new(cfg: &BackendConfig) -> Result<Self> {
        cfg.validate()?;
        let endpoint = cfg
            .endpoint
            .clone()
            .ok_or_else(|| Error::validation("http backend requires an endpoint"))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout())
            .build()
            .map_err(|e| Error::validation(format!("http client: {e}")))?;
        Ok(HttpBackend {
            client,
            endpoint,
            model: cfg.model_name.clone().unwrap_or_default(),
            retries: cfg.retry_count,
            backoff: Duration::from_millis(200),
        })
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn attempt(&self, prompt: &str) -> std::result::Result<String, String> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let resp = self
            .client
            .post(&self.endpoint)
            .json(&body)
            .send()
            .map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("HTTP {status}"));
        }
        let v: Value = resp.json().map_err(|e| e.to_string())?;
        let text = v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or("response lacks choices[0].message.content")?;
        if text.trim().is_empty() {
            return Err("empty completion".into());
        }
        Ok(text.to_string())
    }
}

impl Backend for HttpBackend {
    fn complete(&self, prompt: &str) -> Result<String> {
        let mut last = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                thread::sleep(self.backoff * attempt as u32);
            }
            match self.attempt(prompt) {
                Ok(text) => return Ok(text),
                Err(e) => {
                    tracing::debug!(attempt, error = %e, "backend request failed");
                    last = e;
                }
            }
        }
        Err(Error::Backend {
            fingerprint: fingerprint(prompt),
            message: format!("{} attempt(s) failed: {last}", self.retries + 1),
        })
    }
}

pub fn build_backend(
    cfg: &BackendConfig,
    reason_table: Option<BTreeMap<String, String>>,
) -> Result<Arc<dyn Backend>> {
    cfg.validate()?;
    Ok(match cfg.kind {
        BackendKind::Stub => Arc::new(StubBackend::new(reason_table)),
        BackendKind::Http => Arc::new(HttpBackend::new(cfg)?),
    })
}
