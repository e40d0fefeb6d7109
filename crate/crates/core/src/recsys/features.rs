//! Turning interaction records plus explanation embeddings into model inputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::{RecModelParams, EMBED_DIM};
use super::{Task, Variant};
use crate::autoencoder::tokenize;
use crate::dataset::{scale_rating, InteractionRecord};
use crate::error::{Error, Result};

/// Hour-of-day and day-of-week, each as a sine/cosine pair.
pub const CONTEXT_DIM: usize = 4;

/// Cyclic time features of a Unix timestamp in seconds.
pub fn context_features(ts: i64) -> [f64; CONTEXT_DIM] {
    use std::f64::consts::TAU;
    let day = ts.rem_euclid(86_400) as f64 / 86_400.0;
    let week = ts.rem_euclid(7 * 86_400) as f64 / (7.0 * 86_400.0);
    [
        (TAU * day).sin(),
        (TAU * day).cos(),
        (TAU * week).sin(),
        (TAU * week).cos(),
    ]
}

/// Fixed random projection of a hashed bag of words. Every token adds a
/// pseudo-random vector in `[-1, 1]^dim` taken from its SHA-256 digest; the
/// sum is divided by √(token count).
pub fn hashed_text_embedding(text: &str, dim: usize) -> Vec<f64> {
    let tokens = tokenize(text);
    let mut out = vec![0.0; dim];
    for t in &tokens {
        let digest = Sha256::digest(t.as_bytes());
        for (k, o) in out.iter_mut().enumerate() {
            *o += digest[k % digest.len()] as f64 / 127.5 - 1.0;
        }
    }
    if !tokens.is_empty() {
        let s = (tokens.len() as f64).sqrt();
        out.iter_mut().for_each(|x| *x /= s);
    }
    out
}

/// Embeddings for the two explanation slots of one record. Single-text
/// ablations (aspect, general, summary) put their vector in `positive`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordExplanation {
    pub positive: Option<Vec<f64>>,
    pub negative: Option<Vec<f64>>,
}

/// One record resolved to table rows and dense inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RecExample {
    pub key: String,
    pub user: usize,
    /// Row in the product table (row 0 is the sentinel).
    pub item: usize,
    pub history: Vec<usize>,
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
    pub context: Vec<f64>,
    pub target: f64,
}

fn slot(v: &Option<Vec<f64>>) -> Result<Option<Vec<f64>>> {
    match v {
        Some(e) if e.len() != EMBED_DIM => Err(Error::validation(format!(
            "explanation embedding has {} dims, expected {EMBED_DIM}",
            e.len()
        ))),
        other => Ok(other.clone()),
    }
}

/// Resolves ids and assembles the explanation slots according to the
/// variant. Variants that read both explanations fail on a record without
/// them; single-slot ablations zero-fill a missing vector.
pub fn build_examples(
    records: &[InteractionRecord],
    params: &RecModelParams,
    explanations: &BTreeMap<String, RecordExplanation>,
) -> Result<Vec<RecExample>> {
    let variant = params.variant;
    let zero = vec![0.0; EMBED_DIM];
    let mut missing = Vec::new();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let key = r.id();
        let e = explanations.get(&key).cloned().unwrap_or_default();
        let (p, n) = (slot(&e.positive)?, slot(&e.negative)?);
        let (pos, neg) = match variant {
            _ if variant.needs_pair() => match (p, n) {
                (Some(p), Some(n)) => (p, n),
                _ => {
                    missing.push(key.clone());
                    (zero.clone(), zero.clone())
                }
            },
            Variant::PosOnly | Variant::AspectOnly | Variant::GeneralOnly | Variant::SummaryOnly => {
                (p.unwrap_or_else(|| zero.clone()), zero.clone())
            }
            Variant::NegOnly => (zero.clone(), n.unwrap_or_else(|| zero.clone())),
            _ => (zero.clone(), zero.clone()),
        };
        if r.history.len() != params.history_len {
            return Err(Error::validation(format!(
                "record {key} has history length {}, model expects {}",
                r.history.len(),
                params.history_len
            )));
        }
        let history = r
            .history
            .iter()
            .map(|h| params.item_row(h))
            .collect::<Result<Vec<_>>>()?;
        let target = match params.task {
            Task::Classification => r.label()? as f64,
            Task::Regression if params.linear_head => {
                r.label()?;
                r.rating
            }
            Task::Regression => scale_rating(r.rating)?,
        };
        out.push(RecExample {
            user: params.user_row(&r.user_id)?,
            item: params.item_row(&r.item_id)?,
            history,
            pos,
            neg,
            context: if params.use_context {
                context_features(r.timestamp).to_vec()
            } else {
                vec![0.0; CONTEXT_DIM]
            },
            target,
            key,
        });
    }
    if !missing.is_empty() {
        let shown: Vec<&str> = missing.iter().take(10).map(String::as_str).collect();
        return Err(Error::validation(format!(
            "variant {variant} needs both explanation embeddings; {} record(s) lack them: {}{}",
            missing.len(),
            shown.join(", "),
            if missing.len() > shown.len() { ", ..." } else { "" }
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_features_are_on_the_unit_circles() {
        for ts in [0, 1_700_000_000, -5, 86_399] {
            let c = context_features(ts);
            assert!((c[0].powi(2) + c[1].powi(2) - 1.0).abs() < 1e-12);
            assert!((c[2].powi(2) + c[3].powi(2) - 1.0).abs() < 1e-12);
        }
        assert_eq!(context_features(0), context_features(7 * 86_400));
    }

    #[test]
    fn hashed_embedding_is_deterministic_and_bag_of_words() {
        let a = hashed_text_embedding("the room is quiet", 8);
        assert_eq!(a, hashed_text_embedding("the room is quiet", 8));
        let b = hashed_text_embedding("quiet is the room", 8);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_ne!(a, hashed_text_embedding("the room is lively", 8));
        assert_eq!(hashed_text_embedding("", 8), vec![0.0; 8]);
    }
}
