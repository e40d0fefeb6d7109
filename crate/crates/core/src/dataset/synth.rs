use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{pad_history, InteractionRecord, ItemProfile, SENTINEL_ITEM};
use crate::error::{Error, Result};

/// Latent item attributes. The generator uses the first `n_tokens` entries.
pub const REASON_TOKENS: &[&str] = &[
    "spicy", "cozy", "vintage", "organic", "sporty", "luxury", "budget", "family", "rustic", "modern",
    "quiet", "lively",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub history_len: usize,
    pub records_per_user: usize,
    pub n_tokens: usize,
    /// P(y = 1) when the candidate token matches the history majority;
    /// a mismatch gives `1 − match_prob`.
    pub match_prob: f64,
    /// Label flip probability applied after the match rule.
    pub noise: f64,
    /// Probability that a candidate is drawn from the majority token's items.
    pub candidate_match_rate: f64,
    /// Fraction of users that start with a single prior item instead of a full
    /// history, so their early records carry padded histories.
    pub short_history_frac: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 200,
            n_items: 50,
            history_len: super::DEFAULT_HISTORY_LEN,
            records_per_user: 10,
            n_tokens: 5,
            match_prob: 1.0,
            noise: 0.1,
            candidate_match_rate: 0.5,
            short_history_frac: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticData {
    pub records: Vec<InteractionRecord>,
    pub profiles: Vec<ItemProfile>,
    /// item_id → planted reason token.
    pub reason_table: BTreeMap<String, String>,
    /// P(y = 1) under the generative rule, parallel to `records`.
    pub label_prob: Vec<f64>,
}

impl SyntheticData {
    /// Expected AUC of the Bayes scorer `P(y=1|record)` over the given
    /// record indices: labels are independent Bernoulli draws, so the AUC is
    /// the ratio of expected concordant mass to expected pair mass.
    pub fn bayes_auc(&self, indices: &[usize]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for &i in indices {
            for &j in indices {
                if i == j {
                    continue;
                }
                let (pi, pj) = (self.label_prob[i], self.label_prob[j]);
                let w = pi * (1.0 - pj);
                den += w;
                num += w * match pi.partial_cmp(&pj) {
                    Some(std::cmp::Ordering::Greater) => 1.0,
                    Some(std::cmp::Ordering::Equal) => 0.5,
                    _ => 0.0,
                };
            }
        }
        num / den
    }
}

/// Most frequent token over the real history items; ties go to the token seen
/// most recently. `None` when the history holds only sentinels.
pub fn majority_token<'a>(
    history: &[String],
    reason_table: &'a BTreeMap<String, String>,
) -> Option<&'a str> {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (pos, item) in history.iter().enumerate() {
        if item == SENTINEL_ITEM {
            continue;
        }
        if let Some(tok) = reason_table.get(item) {
            let e = counts.entry(tok.as_str()).or_insert((0, 0));
            e.0 += 1;
            e.1 = pos;
        }
    }
    counts
        .into_iter()
        .max_by_key(|(_, (count, last))| (*count, *last))
        .map(|(tok, _)| tok)
}

pub fn item_id(idx: usize) -> String {
    format!("i{idx}")
}

pub fn gen_synthetic_recsys(cfg: &SynthConfig) -> Result<SyntheticData> {
    if cfg.n_users == 0 || cfg.n_items == 0 || cfg.history_len == 0 || cfg.records_per_user == 0 {
        return Err(Error::validation("synthetic sizes must be at least 1"));
    }
    if cfg.n_tokens == 0 || cfg.n_tokens > REASON_TOKENS.len() {
        return Err(Error::validation(format!(
            "n_tokens must be in 1..={}",
            REASON_TOKENS.len()
        )));
    }
    for (name, v) in [
        ("match_prob", cfg.match_prob),
        ("noise", cfg.noise),
        ("candidate_match_rate", cfg.candidate_match_rate),
        ("short_history_frac", cfg.short_history_frac),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::validation(format!("{name} = {v} not in [0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // balanced token assignment, shuffled over items
    let mut token_of: Vec<usize> = (0..cfg.n_items).map(|i| i % cfg.n_tokens).collect();
    token_of.shuffle(&mut rng);
    let mut items_by_token: Vec<Vec<usize>> = vec![Vec::new(); cfg.n_tokens];
    for (i, &t) in token_of.iter().enumerate() {
        items_by_token[t].push(i);
    }
    let reason_table: BTreeMap<String, String> = (0..cfg.n_items)
        .map(|i| (item_id(i), REASON_TOKENS[token_of[i]].to_string()))
        .collect();
    let profiles = (0..cfg.n_items)
        .map(|i| ItemProfile {
            item_id: item_id(i),
            name: format!("Product {}", item_id(i)),
            augmented_profile: None,
        })
        .collect();

    let h = cfg.history_len;
    let mut records = Vec::with_capacity(cfg.n_users * cfg.records_per_user);
    let mut label_prob = Vec::with_capacity(records.capacity());
    for u in 0..cfg.n_users {
        let user_id = format!("u{u}");
        let warmup = if rng.gen::<f64>() < cfg.short_history_frac { 1 } else { h };
        let mut seq: Vec<usize> = (0..warmup).map(|_| rng.gen_range(0..cfg.n_items)).collect();
        for k in 0..cfg.records_per_user {
            let recent = &seq[seq.len().saturating_sub(h)..];
            let history: Vec<String> = recent.iter().map(|&i| item_id(i)).collect();
            let history = pad_history(&history, h);
            let major = majority_token(&history, &reason_table)
                .and_then(|t| REASON_TOKENS.iter().position(|x| *x == t))
                .expect("warm-up leaves at least one real item");

            let want_match = rng.gen::<f64>() < cfg.candidate_match_rate;
            let pool: Vec<usize> = if want_match || cfg.n_tokens == 1 {
                items_by_token[major].clone()
            } else {
                (0..cfg.n_items).filter(|&i| token_of[i] != major).collect()
            };
            let fresh: Vec<usize> = pool.iter().copied().filter(|i| !recent.contains(i)).collect();
            let candidate = *fresh
                .choose(&mut rng)
                .or_else(|| pool.choose(&mut rng))
                .expect("token pools are non-empty");

            let matched = token_of[candidate] == major;
            let p_clean = if matched { cfg.match_prob } else { 1.0 - cfg.match_prob };
            let p1 = p_clean * (1.0 - cfg.noise) + (1.0 - p_clean) * cfg.noise;
            let label = rng.gen::<f64>() < p1;
            let rating = if label {
                rng.gen_range(4..=5) as f64
            } else {
                rng.gen_range(1..=3) as f64
            };
            records.push(InteractionRecord {
                user_id: user_id.clone(),
                item_id: item_id(candidate),
                rating,
                timestamp: 1_000 * (k as i64 + 1) + u as i64,
                history,
            });
            label_prob.push(p1);
            seq.push(candidate);
        }
    }
    Ok(SyntheticData {
        records,
        profiles,
        reason_table,
        label_prob,
    })
}
