use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::InteractionRecord;
use crate::error::{Error, Result};

/// Train/test partition at the user-temporal level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<InteractionRecord>,
    pub test: Vec<InteractionRecord>,
    pub ratio: f64,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl DatasetSplit {
    pub fn train_fraction(&self) -> f64 {
        let total = self.train.len() + self.test.len();
        if total == 0 {
            0.0
        } else {
            self.train.len() as f64 / total as f64
        }
    }
}

/// Sends each user's earliest `ceil(ratio·k)` records to train and the rest to
/// test. Timestamp ties keep input order. Both halves preserve input order.
pub fn split_user_temporal(records: &[InteractionRecord], ratio: f64) -> Result<DatasetSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::validation(format!("split ratio {ratio} not in (0, 1)")));
    }
    let mut by_user: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut user_order = Vec::new();
    for (idx, r) in records.iter().enumerate() {
        let entry = by_user.entry(r.user_id.as_str()).or_insert_with(|| {
            user_order.push(r.user_id.as_str());
            Vec::new()
        });
        entry.push(idx);
    }

    let mut in_train = vec![false; records.len()];
    let mut warnings = Vec::new();
    let mut single = 0usize;
    for user in &user_order {
        let mut idxs = by_user[user].clone();
        // stable sort keeps input order for equal timestamps
        idxs.sort_by_key(|&i| records[i].timestamp);
        let k = idxs.len();
        if k == 1 {
            single += 1;
        }
        let n_train = ((ratio * k as f64).ceil() as usize).clamp(1, k);
        for &i in &idxs[..n_train] {
            in_train[i] = true;
        }
    }
    if single > 0 {
        let msg = format!("{single} user(s) have a single record; they appear only in train");
        tracing::warn!("{msg}");
        warnings.push(msg);
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (r, t) in records.iter().zip(&in_train) {
        if *t {
            train.push(r.clone());
        } else {
            test.push(r.clone());
        }
    }
    if test.is_empty() {
        let msg = "test set is empty".to_string();
        tracing::warn!("{msg}");
        warnings.push(msg);
    }
    let split = DatasetSplit {
        train,
        test,
        ratio,
        warnings,
    };
    let frac = split.train_fraction();
    if (frac - ratio).abs() > 0.02 {
        let msg = format!("global train fraction {frac:.4} deviates from ratio {ratio} by more than 2%");
        tracing::warn!("{msg}");
        let mut split = split;
        split.warnings.push(msg);
        return Ok(split);
    }
    Ok(split)
}
