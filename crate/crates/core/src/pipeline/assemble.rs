//! In-memory glue between explanation texts, the AutoEncoder and the
//! recommender inputs.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{embed_explanation, AutoEncoderParams};
use crate::dataset::InteractionRecord;
use crate::error::{Error, Result};
use crate::llm::{BatchOutcome, Polarity};
use crate::recsys::{hashed_text_embedding, RecordExplanation, Variant, EMBED_DIM};

/// Record id → generated text per polarity.
pub type RecordTexts = BTreeMap<String, BTreeMap<Polarity, String>>;

/// The explanation styles a variant reads, in slot order.
pub fn polarities_for(variant: Variant) -> Vec<Polarity> {
    match variant {
        Variant::Full | Variant::NoAutoencoder | Variant::NoProfileAugmentation | Variant::NcfHead => {
            vec![Polarity::Positive, Polarity::Negative]
        }
        Variant::PosOnly => vec![Polarity::Positive],
        Variant::NegOnly => vec![Polarity::Negative],
        Variant::AspectOnly => vec![Polarity::Aspect],
        Variant::GeneralOnly => vec![Polarity::General],
        Variant::SummaryOnly => vec![Polarity::Summary],
        Variant::NoExplanations | Variant::FreeParamsSubstitute => Vec::new(),
    }
}

/// Whether explanation texts are encoded with the trained AutoEncoder.
pub fn uses_autoencoder(variant: Variant) -> bool {
    variant.uses_explanations() && variant != Variant::NoAutoencoder
}

/// Whether explanation prompts use the augmented item profiles.
pub fn uses_augmented_profiles(variant: Variant) -> bool {
    variant.uses_explanations() && variant != Variant::NoProfileAugmentation
}

/// Texts from a generation batch run over `records` in the same order.
pub fn collect_texts(records: &[InteractionRecord], outcome: &BatchOutcome) -> RecordTexts {
    records
        .iter()
        .zip(&outcome.texts)
        .filter(|(_, t)| !t.is_empty())
        .map(|(r, t)| (r.id(), t.clone()))
        .collect()
}

/// Training corpus for the AutoEncoder: each record's texts in polarity
/// order, records in input order. Records without text are skipped.
pub fn ae_corpus(records: &[InteractionRecord], texts: &RecordTexts, polarities: &[Polarity]) -> Vec<String> {
    let mut out = Vec::with_capacity(records.len() * polarities.len());
    for r in records {
        if let Some(t) = texts.get(&r.id()) {
            out.extend(polarities.iter().filter_map(|p| t.get(p).cloned()));
        }
    }
    out
}

/// Slot embeddings for every record that has the variant's texts. The
/// first polarity fills the positive slot except for `neg_only`.
pub fn embed_records(
    texts: &RecordTexts,
    variant: Variant,
    ae: Option<&AutoEncoderParams>,
) -> Result<BTreeMap<String, RecordExplanation>> {
    let pols = polarities_for(variant);
    if pols.is_empty() {
        return Ok(BTreeMap::new());
    }
    let encode = |text: &str| -> Result<Vec<f64>> {
        if variant == Variant::NoAutoencoder {
            return Ok(hashed_text_embedding(text, EMBED_DIM));
        }
        let ae = ae.ok_or_else(|| {
            Error::validation(format!("variant {variant} needs a trained AutoEncoder"))
        })?;
        embed_explanation(text, &ae.vocab, ae)
    };
    let mut out = BTreeMap::new();
    for (key, t) in texts {
        let mut e = RecordExplanation::default();
        for &p in &pols {
            let Some(text) = t.get(&p) else { continue };
            let v = encode(text)?;
            if p == Polarity::Negative {
                e.negative = Some(v);
            } else {
                e.positive = Some(v);
            }
        }
        out.insert(key.clone(), e);
    }
    Ok(out)
}

/// A seeded random subset of `ceil(fraction·n)` records, in input order.
pub fn subsample(records: &[InteractionRecord], fraction: f64, seed: u64) -> Result<Vec<InteractionRecord>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::validation("fraction must be in (0, 1]"));
    }
    if fraction == 1.0 {
        return Ok(records.to_vec());
    }
    let k = ((fraction * records.len() as f64).ceil() as usize).clamp(1, records.len().max(1));
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5AB5_A3B1));
    idx.truncate(k);
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| records[i].clone()).collect())
}

/// One row of the explanation artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRow {
    pub key: String,
    pub texts: BTreeMap<Polarity, String>,
}

/// One row of the embedding artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRow {
    pub key: String,
    #[serde(flatten)]
    pub explanation: RecordExplanation,
}
