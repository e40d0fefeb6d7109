//! Interaction records, item profiles, loading, splitting and the planted-signal
//! synthetic generator.

mod io;
mod split;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_dataset, load_profiles, load_records, write_jsonl, FieldMapping};
pub use split::{split_user_temporal, DatasetSplit};
pub use synth::{gen_synthetic_recsys, majority_token, SynthConfig, SyntheticData, REASON_TOKENS};

/// Reserved item id used to left-pad short histories. It owns row 0 of the
/// item embedding table.
pub const SENTINEL_ITEM: &str = "<pad>";

pub const DEFAULT_HISTORY_LEN: usize = 5;

/// One observed (consumer, item) interaction with the consumer's preceding
/// purchases, most recent last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub user_id: String,
    pub item_id: String,
    pub rating: f64,
    #[serde(rename = "ts")]
    pub timestamp: i64,
    pub history: Vec<String>,
}

impl InteractionRecord {
    /// Stable identifier used as the explanation cache key.
    pub fn key(&self) -> String {
        record_key(&self.user_id, &self.item_id)
    }

    /// Identifies one interaction; a user can meet the same item twice with
    /// different histories.
    pub fn id(&self) -> String {
        format!("{}@{}", self.key(), self.timestamp)
    }

    pub fn label(&self) -> Result<u8> {
        binarize_rating(self.rating)
    }

    /// History entries that are real items (sentinels dropped).
    pub fn real_history(&self) -> impl Iterator<Item = &str> {
        self.history
            .iter()
            .map(String::as_str)
            .filter(|h| *h != SENTINEL_ITEM)
    }
}

pub fn record_key(user_id: &str, item_id: &str) -> String {
    format!("{user_id}::{item_id}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemProfile {
    pub item_id: String,
    pub name: String,
    #[serde(rename = "profile", default, skip_serializing_if = "Option::is_none")]
    pub augmented_profile: Option<String>,
}

impl ItemProfile {
    /// Text used to describe the item in prompts: the augmented profile when
    /// present, otherwise the name.
    pub fn text(&self) -> &str {
        self.augmented_profile.as_deref().unwrap_or(&self.name)
    }
}

fn check_rating(rating: f64) -> Result<()> {
    if !(1.0..=5.0).contains(&rating) || rating.is_nan() {
        return Err(Error::validation(format!(
            "rating {rating} outside [1, 5]"
        )));
    }
    Ok(())
}

/// High (4 or 5) → 1, low (1, 2 or 3) → 0.
pub fn binarize_rating(rating: f64) -> Result<u8> {
    check_rating(rating)?;
    Ok(u8::from(rating >= 4.0))
}

/// Maps a 1–5 rating onto `[0, 1]` for the sigmoid regression head.
pub fn scale_rating(rating: f64) -> Result<f64> {
    check_rating(rating)?;
    Ok((rating - 1.0) / 4.0)
}

pub fn unscale_rating(scaled: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&scaled) {
        return Err(Error::validation(format!(
            "scaled rating {scaled} outside [0, 1]"
        )));
    }
    Ok(scaled * 4.0 + 1.0)
}

/// Left-pads (or truncates from the front) so the result holds exactly `len`
/// entries with the most recent item last.
pub fn pad_history(history: &[String], len: usize) -> Vec<String> {
    let keep = &history[history.len().saturating_sub(len)..];
    let mut out = vec![SENTINEL_ITEM.to_string(); len - keep.len()];
    out.extend(keep.iter().cloned());
    out
}
