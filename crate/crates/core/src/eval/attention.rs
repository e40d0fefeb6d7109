//! Summaries of the 6×6 input-attention matrices.
//!
//! Slot order is `[pos, neg, c, p, seq, ctx]`. ᾱ for a slot is the mean over
//! the six query rows of the attention paid to that slot's column.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recsys::SLOTS;

pub const SLOT_NAMES: [&str; SLOTS] = ["pos", "neg", "consumer", "product", "sequence", "context"];
pub const POS_SLOT: usize = 0;
pub const NEG_SLOT: usize = 1;
/// Histogram bin width on `[0, 1]`.
pub const BIN_WIDTH: f64 = 0.05;
const ROW_SUM_TOL: f64 = 1e-6;

/// Which reading of "attention on a slot" to average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionAxis {
    /// Attention every query pays to the slot: column mean.
    #[default]
    Column,
    /// Attention the slot's own query distributes: row mean. Every row of a
    /// row-stochastic matrix sums to 1, so this is always 1/6; it is kept
    /// for comparison only.
    Row,
}

impl std::str::FromStr for AttentionAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "column" => Ok(AttentionAxis::Column),
            "row" => Ok(AttentionAxis::Row),
            _ => Err(Error::validation(format!("unknown attention axis `{s}` (column or row)"))),
        }
    }
}

/// Per-slot means of one record's matrix.
pub fn slot_means(alpha: &[f64], axis: AttentionAxis) -> Result<[f64; SLOTS]> {
    if alpha.len() != SLOTS * SLOTS {
        return Err(Error::validation(format!(
            "attention matrix has {} entries, expected {}",
            alpha.len(),
            SLOTS * SLOTS
        )));
    }
    for (i, row) in alpha.chunks(SLOTS).enumerate() {
        let s: f64 = row.iter().sum();
        if row.iter().any(|a| !(0.0..=1.0).contains(a)) || (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::validation(format!(
                "attention row {i} is not a probability vector (sum {s})"
            )));
        }
    }
    let mut out = [0.0; SLOTS];
    for i in 0..SLOTS {
        for (j, o) in out.iter_mut().enumerate() {
            *o += match axis {
                AttentionAxis::Column => alpha[i * SLOTS + j],
                AttentionAxis::Row => alpha[j * SLOTS + i],
            };
        }
    }
    out.iter_mut().for_each(|o| *o /= SLOTS as f64);
    Ok(out)
}

/// ᾱ values of one prediction group.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupAttention {
    pub alpha_pos: Vec<f64>,
    pub alpha_neg: Vec<f64>,
}

impl GroupAttention {
    pub fn len(&self) -> usize {
        self.alpha_pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha_pos.is_empty()
    }

    /// Means of ᾱ_pos and ᾱ_neg, `None` for an empty group.
    pub fn means(&self) -> Option<(f64, f64)> {
        if self.is_empty() {
            return None;
        }
        let n = self.len() as f64;
        Some((
            self.alpha_pos.iter().sum::<f64>() / n,
            self.alpha_neg.iter().sum::<f64>() / n,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionSummary {
    pub axis: AttentionAxis,
    pub threshold: f64,
    /// Mean ᾱ_pos and ᾱ_neg over all records.
    pub alpha_pos: f64,
    pub alpha_neg: f64,
    /// Records with prediction ≥ threshold.
    pub high: GroupAttention,
    pub low: GroupAttention,
    /// Per-slot attention totals over all records, normalised to shares.
    pub slot_shares: [f64; SLOTS],
    /// Largest deviation from 1 of a record's summed slot means.
    pub max_share_error: f64,
}

/// Splits records by predicted value at `threshold` and collects ᾱ_pos and
/// ᾱ_neg for each group.
pub fn attention_summary(
    alphas: &[Vec<f64>],
    predictions: &[f64],
    threshold: f64,
    axis: AttentionAxis,
) -> Result<AttentionSummary> {
    if alphas.is_empty() || alphas.len() != predictions.len() {
        return Err(Error::validation(format!(
            "need one prediction per attention matrix (got {} and {})",
            alphas.len(),
            predictions.len()
        )));
    }
    let (mut high, mut low) = (GroupAttention::default(), GroupAttention::default());
    let mut totals = [0.0; SLOTS];
    let mut max_share_error: f64 = 0.0;
    for (a, &yhat) in alphas.iter().zip(predictions) {
        let m = slot_means(a, axis)?;
        max_share_error = max_share_error.max((m.iter().sum::<f64>() - 1.0).abs());
        totals.iter_mut().zip(&m).for_each(|(t, v)| *t += v);
        let g = if yhat >= threshold { &mut high } else { &mut low };
        g.alpha_pos.push(m[POS_SLOT]);
        g.alpha_neg.push(m[NEG_SLOT]);
    }
    let n = alphas.len() as f64;
    let total: f64 = totals.iter().sum();
    Ok(AttentionSummary {
        axis,
        threshold,
        alpha_pos: totals[POS_SLOT] / n,
        alpha_neg: totals[NEG_SLOT] / n,
        high,
        low,
        slot_shares: totals.map(|t| t / total),
        max_share_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count_pos: usize,
    pub count_neg: usize,
}

/// Fixed-width histogram of a group's ᾱ_pos and ᾱ_neg over `[0, 1]`. The
/// value 1 lands in the last bin.
pub fn histogram(group: &GroupAttention) -> Vec<HistBin> {
    let nbins = (1.0 / BIN_WIDTH).round() as usize;
    let mut bins: Vec<HistBin> = (0..nbins)
        .map(|b| HistBin {
            bin_lo: b as f64 * BIN_WIDTH,
            bin_hi: (b + 1) as f64 * BIN_WIDTH,
            count_pos: 0,
            count_neg: 0,
        })
        .collect();
    let index = |v: f64| ((v / BIN_WIDTH).floor() as usize).min(nbins - 1);
    for &v in &group.alpha_pos {
        bins[index(v)].count_pos += 1;
    }
    for &v in &group.alpha_neg {
        bins[index(v)].count_neg += 1;
    }
    bins
}

pub fn histogram_csv(bins: &[HistBin]) -> String {
    let mut s = String::from("bin_lo,bin_hi,count_pos,count_neg\n");
    for b in bins {
        s.push_str(&format!("{:.2},{:.2},{},{}\n", b.bin_lo, b.bin_hi, b.count_pos, b.count_neg));
    }
    s
}

pub fn shares_csv(shares: &[f64; SLOTS]) -> String {
    let mut s = String::from("slot,share\n");
    for (name, v) in SLOT_NAMES.iter().zip(shares) {
        s.push_str(&format!("{name},{v:.6}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn onto(col: usize) -> Vec<f64> {
        let mut a = vec![0.0; 36];
        for i in 0..6 {
            a[i * 6 + col] = 1.0;
        }
        a
    }

    #[test]
    fn uniform_attention_gives_one_sixth() {
        let m = slot_means(&[1.0 / 6.0; 36], AttentionAxis::Column).unwrap();
        for v in m {
            assert!((v - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn concentrated_on_pos() {
        let m = slot_means(&onto(POS_SLOT), AttentionAxis::Column).unwrap();
        assert_eq!((m[POS_SLOT], m[NEG_SLOT]), (1.0, 0.0));
        // The row reading cannot tell the records apart.
        let r = slot_means(&onto(POS_SLOT), AttentionAxis::Row).unwrap();
        assert!(r.iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn malformed_matrices_rejected() {
        assert!(slot_means(&[0.5; 36], AttentionAxis::Column).is_err());
        assert!(slot_means(&[1.0 / 6.0; 35], AttentionAxis::Column).is_err());
        let mut neg = onto(0);
        neg[0] = -0.5;
        neg[1] = 1.5;
        assert!(slot_means(&neg, AttentionAxis::Column).is_err());
    }

    #[test]
    fn groups_split_at_threshold() {
        let s = attention_summary(
            &[onto(POS_SLOT), onto(NEG_SLOT), onto(3)],
            &[0.9, 0.1, 0.5],
            0.5,
            AttentionAxis::Column,
        )
        .unwrap();
        assert_eq!(s.high.alpha_pos, vec![1.0, 0.0]);
        assert_eq!(s.low.alpha_neg, vec![1.0]);
        assert_eq!(s.high.means(), Some((0.5, 0.0)));
        assert_eq!(s.slot_shares[3], 1.0 / 3.0);
        assert_eq!(s.max_share_error, 0.0);
    }

    #[test]
    fn histogram_edges_and_csv() {
        let g = GroupAttention {
            alpha_pos: vec![0.0, 0.049, 0.05, 1.0],
            alpha_neg: vec![0.5],
        };
        let h = histogram(&g);
        assert_eq!(h.len(), 20);
        assert_eq!((h[0].count_pos, h[1].count_pos, h[19].count_pos), (2, 1, 1));
        assert_eq!(h[10].count_neg, 1);
        let csv = histogram_csv(&h);
        assert!(csv.starts_with("bin_lo,bin_hi,count_pos,count_neg\n0.00,0.05,2,0\n"));
        assert_eq!(shares_csv(&[0.0; 6]).lines().count(), 7);
    }

    proptest! {
        #[test]
        fn column_means_of_row_stochastic_sum_to_one(
            raw in prop::collection::vec(0.01f64..10.0, 36)
        ) {
            let mut a = raw.clone();
            for row in a.chunks_mut(6) {
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= s);
            }
            let m = slot_means(&a, AttentionAxis::Column).unwrap();
            prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(m.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
