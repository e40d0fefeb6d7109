//! Batch explanation and profile generation with caching and bounded
//! concurrency.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;

use serde::{Deserialize, Serialize};

use super::backend::{generate, Backend};
use super::cache::{CacheEntry, ExplanationCache};
use super::prompts::{build_explanation_prompt, build_profile_prompt};
use super::{fingerprint, Domain, Polarity};
use crate::dataset::{InteractionRecord, ItemProfile, SENTINEL_ITEM};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationPair {
    pub user_id: String,
    pub item_id: String,
    pub positive_text: String,
    pub negative_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_embedding: Option<Vec<f64>>,
    pub prompt_fingerprint: String,
}

impl ExplanationPair {
    pub fn validate(&self) -> Result<()> {
        if self.positive_text.trim().is_empty() || self.negative_text.trim().is_empty() {
            return Err(Error::validation(format!(
                "empty explanation for {}::{}",
                self.user_id, self.item_id
            )));
        }
        for e in [&self.positive_embedding, &self.negative_embedding]
            .into_iter()
            .flatten()
        {
            if e.len() != 8 || e.iter().any(|x| !x.is_finite()) {
                return Err(Error::validation("explanation embedding must be 8 finite values"));
            }
        }
        Ok(())
    }
}

struct Job {
    key: String,
    polarity: Polarity,
    prompt: String,
    fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingJob {
    pub key: String,
    pub polarity: Polarity,
    pub error: String,
}

/// Result of one batch: `texts[i]` holds the completions obtained for input
/// `i`, keyed by polarity. Jobs whose backend call failed are listed in
/// `pending` and absent from `texts`.
#[derive(Debug, Clone, Default)]
pub struct BatchOutcome {
    pub texts: Vec<BTreeMap<Polarity, String>>,
    pub fingerprints: Vec<BTreeMap<Polarity, String>>,
    pub pending: Vec<PendingJob>,
    pub backend_calls: usize,
    pub cache_hits: usize,
}

pub struct ExplanationGenerator {
    backend: Arc<dyn Backend>,
    pub domain: Domain,
    pub max_concurrency: usize,
    calls: AtomicUsize,
}

fn profile_index(profiles: &[ItemProfile]) -> HashMap<&str, &ItemProfile> {
    profiles.iter().map(|p| (p.item_id.as_str(), p)).collect()
}

fn lookup<'a>(idx: &HashMap<&str, &'a ItemProfile>, id: &str) -> Result<&'a ItemProfile> {
    idx.get(id).copied().ok_or_else(|| Error::UnknownId {
        table: "profiles",
        id: id.to_string(),
    })
}

pub fn record_prompt(
    record: &InteractionRecord,
    idx: &HashMap<&str, &ItemProfile>,
    polarity: Polarity,
    domain: Domain,
) -> Result<String> {
    let history = record
        .history
        .iter()
        .map(|h| {
            if h == SENTINEL_ITEM {
                Ok(None)
            } else {
                lookup(idx, h).map(|p| Some(p.text()))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let history = if history.is_empty() { vec![None] } else { history };
    let cand = lookup(idx, &record.item_id)?;
    build_explanation_prompt(&history, cand.text(), polarity, domain)
}

impl ExplanationGenerator {
    pub fn new(backend: Arc<dyn Backend>, domain: Domain, max_concurrency: usize) -> Self {
        ExplanationGenerator {
            backend,
            domain,
            max_concurrency: max_concurrency.max(1),
            calls: AtomicUsize::new(0),
        }
    }

    /// Backend invocations made through this generator so far.
    pub fn backend_calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    /// Serves cache hits, sends the rest to the backend with up to
    /// `max_concurrency` requests in flight, and appends successful results
    /// to the cache in job order, so the cache file does not depend on
    /// completion order.
    fn run(
        &self,
        n_inputs: usize,
        jobs: Vec<(usize, Job)>,
        cache: &mut ExplanationCache,
    ) -> Result<BatchOutcome> {
        let mut out = BatchOutcome {
            texts: vec![BTreeMap::new(); n_inputs],
            fingerprints: vec![BTreeMap::new(); n_inputs],
            ..BatchOutcome::default()
        };
        // unique misses, first occurrence order
        let mut todo: Vec<&Job> = Vec::new();
        let mut slot_of: HashMap<(&str, Polarity, &str), usize> = HashMap::new();
        for (input, job) in &jobs {
            out.fingerprints[*input].insert(job.polarity, job.fingerprint.clone());
            if let Some(text) = cache.get(&job.key, job.polarity, &job.fingerprint) {
                out.texts[*input].insert(job.polarity, text.to_string());
                out.cache_hits += 1;
                continue;
            }
            slot_of
                .entry((job.key.as_str(), job.polarity, job.fingerprint.as_str()))
                .or_insert_with(|| {
                    todo.push(job);
                    todo.len() - 1
                });
        }

        let n = todo.len();
        let mut results: Vec<Option<Result<String>>> = (0..n).map(|_| None).collect();
        let mut write_err = None;
        if n > 0 {
            let next = AtomicUsize::new(0);
            let workers = self.max_concurrency.min(n);
            thread::scope(|s| {
                let (tx, rx) = mpsc::channel();
                for _ in 0..workers {
                    let tx = tx.clone();
                    let next = &next;
                    let todo = &todo;
                    s.spawn(move || loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= n {
                            break;
                        }
                        self.calls.fetch_add(1, Ordering::Relaxed);
                        let r = generate(self.backend.as_ref(), &todo[i].prompt);
                        if tx.send((i, r)).is_err() {
                            break;
                        }
                    });
                }
                drop(tx);
                let mut flushed = 0;
                for (i, r) in rx {
                    results[i] = Some(r);
                    while flushed < n {
                        let Some(r) = &results[flushed] else { break };
                        if let (Ok(text), None) = (r, &write_err) {
                            let job = todo[flushed];
                            if let Err(e) = cache.insert(CacheEntry {
                                key: job.key.clone(),
                                polarity: job.polarity,
                                text: text.clone(),
                                fingerprint: job.fingerprint.clone(),
                            }) {
                                write_err = Some(e);
                            }
                        }
                        flushed += 1;
                    }
                }
            });
        }
        if let Some(e) = write_err {
            return Err(e);
        }
        out.backend_calls = n;

        for (input, job) in &jobs {
            if out.texts[*input].contains_key(&job.polarity) {
                continue;
            }
            let slot = slot_of[&(job.key.as_str(), job.polarity, job.fingerprint.as_str())];
            match results[slot].as_ref().expect("every job ran") {
                Ok(text) => {
                    out.texts[*input].insert(job.polarity, text.clone());
                }
                Err(e) => out.pending.push(PendingJob {
                    key: job.key.clone(),
                    polarity: job.polarity,
                    error: e.to_string(),
                }),
            }
        }
        Ok(out)
    }

    /// Generates every requested polarity for every record, independent of
    /// the record's label.
    pub fn explain_records(
        &self,
        records: &[InteractionRecord],
        profiles: &[ItemProfile],
        polarities: &[Polarity],
        cache: &mut ExplanationCache,
    ) -> Result<BatchOutcome> {
        let idx = profile_index(profiles);
        let mut jobs = Vec::with_capacity(records.len() * polarities.len());
        for (i, r) in records.iter().enumerate() {
            for &pol in polarities {
                let prompt = record_prompt(r, &idx, pol, self.domain)?;
                jobs.push((
                    i,
                    Job {
                        key: r.key(),
                        polarity: pol,
                        fingerprint: fingerprint(&prompt),
                        prompt,
                    },
                ));
            }
        }
        self.run(records.len(), jobs, cache)
    }

    /// Fills `augmented_profile` for items that lack one.
    pub fn augment(
        &self,
        items: &[ItemProfile],
        cache: &mut ExplanationCache,
    ) -> Result<(Vec<ItemProfile>, BatchOutcome)> {
        let mut jobs = Vec::new();
        for (i, item) in items.iter().enumerate() {
            if item.augmented_profile.is_some() {
                continue;
            }
            let prompt = build_profile_prompt(&item.name, self.domain)?;
            jobs.push((
                i,
                Job {
                    key: item.item_id.clone(),
                    polarity: Polarity::Profile,
                    fingerprint: fingerprint(&prompt),
                    prompt,
                },
            ));
        }
        let outcome = self.run(items.len(), jobs, cache)?;
        let filled = items
            .iter()
            .zip(&outcome.texts)
            .map(|(item, t)| {
                let mut item = item.clone();
                if let Some(p) = t.get(&Polarity::Profile) {
                    item.augmented_profile = Some(p.clone());
                }
                item
            })
            .collect();
        Ok((filled, outcome))
    }

    /// Assembles pairs for records that received both polarities.
    pub fn pairs(
        &self,
        records: &[InteractionRecord],
        outcome: &BatchOutcome,
    ) -> Vec<Option<ExplanationPair>> {
        records
            .iter()
            .zip(outcome.texts.iter().zip(&outcome.fingerprints))
            .map(|(r, (texts, fps))| {
                let pos = texts.get(&Polarity::Positive)?;
                let neg = texts.get(&Polarity::Negative)?;
                Some(ExplanationPair {
                    user_id: r.user_id.clone(),
                    item_id: r.item_id.clone(),
                    positive_text: pos.clone(),
                    negative_text: neg.clone(),
                    positive_embedding: None,
                    negative_embedding: None,
                    prompt_fingerprint: fingerprint(&format!(
                        "{}\u{0}{}",
                        fps[&Polarity::Positive],
                        fps[&Polarity::Negative]
                    )),
                })
            })
            .collect()
    }
}

/// Single-record convenience wrapper: both polarities, cached.
pub fn generate_explanations(
    record: &InteractionRecord,
    profiles: &[ItemProfile],
    generator: &ExplanationGenerator,
    cache: &mut ExplanationCache,
) -> Result<ExplanationPair> {
    let records = std::slice::from_ref(record);
    let outcome = generator.explain_records(
        records,
        profiles,
        &[Polarity::Positive, Polarity::Negative],
        cache,
    )?;
    if let Some(p) = outcome.pending.first() {
        return Err(Error::Backend {
            fingerprint: outcome.fingerprints[0][&p.polarity].clone(),
            message: p.error.clone(),
        });
    }
    Ok(generator
        .pairs(records, &outcome)
        .pop()
        .flatten()
        .expect("both polarities present"))
}

/// Optional profile augmentation; `enabled = false` returns the items as is.
pub fn augment_profiles(
    items: &[ItemProfile],
    generator: &ExplanationGenerator,
    cache: &mut ExplanationCache,
    enabled: bool,
) -> Result<Vec<ItemProfile>> {
    if !enabled {
        return Ok(items.to_vec());
    }
    let (filled, outcome) = generator.augment(items, cache)?;
    if let Some(p) = outcome.pending.first() {
        return Err(Error::Backend {
            fingerprint: p.key.clone(),
            message: p.error.clone(),
        });
    }
    Ok(filled)
}
