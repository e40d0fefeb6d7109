//! Error and ranking metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recsys::Task;

/// One row of the metrics table. `auc` is `None` when the labels hold a
/// single class (or for regression targets that are not binary).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub label: String,
    pub task: Task,
    pub n: usize,
    pub rmse: f64,
    pub mae: f64,
    pub auc: Option<f64>,
}

fn check_lengths(y_true: &[f64], y_pred: &[f64]) -> Result<()> {
    if y_true.is_empty() || y_true.len() != y_pred.len() {
        return Err(Error::validation(format!(
            "metric inputs must be non-empty and of equal length (got {} and {})",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.iter().chain(y_pred).any(|v| !v.is_finite()) {
        return Err(Error::validation("metric inputs contain non-finite values"));
    }
    Ok(())
}

pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_lengths(y_true, y_pred)?;
    let sse: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).powi(2)).sum();
    Ok((sse / y_true.len() as f64).sqrt())
}

pub fn mae(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_lengths(y_true, y_pred)?;
    let sae: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum();
    Ok(sae / y_true.len() as f64)
}

/// Area under the ROC curve from midranks (Mann–Whitney U). Ties in the
/// scores count one half per positive/negative pair. Labels must be 0 or 1.
pub fn auc(labels: &[f64], scores: &[f64]) -> Result<f64> {
    check_lengths(labels, scores)?;
    if labels.iter().any(|&l| l != 0.0 && l != 1.0) {
        return Err(Error::validation("AUC labels must be 0 or 1"));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Undefined(
            "AUC needs both classes among the labels".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] == 1.0 {
                rank_sum_pos += mid;
            }
        }
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// RMSE and MAE always; AUC for classification when both classes occur.
pub fn compute_metrics(
    label: &str,
    y_true: &[f64],
    y_pred: &[f64],
    task: Task,
) -> Result<MetricReport> {
    let auc = match task {
        Task::Classification => match auc(y_true, y_pred) {
            Ok(a) => Some(a),
            Err(Error::Undefined(msg)) => {
                tracing::warn!(label, "{msg}; AUC left undefined");
                None
            }
            Err(e) => return Err(e),
        },
        Task::Regression => None,
    };
    Ok(MetricReport {
        label: label.to_string(),
        task,
        n: y_true.len(),
        rmse: rmse(y_true, y_pred)?,
        mae: mae(y_true, y_pred)?,
        auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair_count(labels: &[f64], scores: &[f64]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li == 1.0 && lj == 0.0 {
                    den += 1.0;
                    num += match scores[i].partial_cmp(&scores[j]).unwrap() {
                        std::cmp::Ordering::Greater => 1.0,
                        std::cmp::Ordering::Equal => 0.5,
                        std::cmp::Ordering::Less => 0.0,
                    };
                }
            }
        }
        num / den
    }

    #[test]
    fn four_pair_example() {
        let a = auc(&[1.0, 0.0, 1.0, 0.0], &[0.9, 0.8, 0.4, 0.1]).unwrap();
        assert_eq!(a, 0.75);
    }

    #[test]
    fn perfect_order_and_all_ties() {
        assert_eq!(auc(&[0.0, 0.0, 1.0], &[0.1, 0.2, 0.3]).unwrap(), 1.0);
        assert_eq!(auc(&[0.0, 1.0, 1.0], &[0.5, 0.5, 0.5]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_undefined_not_half() {
        assert!(matches!(auc(&[1.0, 1.0], &[0.2, 0.3]), Err(Error::Undefined(_))));
        let r = compute_metrics("x", &[1.0, 1.0], &[0.2, 0.3], Task::Classification).unwrap();
        assert_eq!(r.auc, None);
    }

    #[test]
    fn identity_regression_has_zero_error() {
        let y = [0.1, 0.5, 0.9];
        let r = compute_metrics("x", &y, &y, Task::Regression).unwrap();
        assert_eq!((r.rmse, r.mae, r.n), (0.0, 0.0, 3));
    }

    #[test]
    fn rmse_and_mae_by_hand() {
        let t = [0.0, 0.0, 0.0, 0.0];
        let p = [1.0, -1.0, 3.0, 0.0];
        assert_eq!(mae(&t, &p).unwrap(), 1.25);
        assert!((rmse(&t, &p).unwrap() - (11.0f64 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(rmse(&[], &[]).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
        assert!(auc(&[2.0, 0.0], &[0.1, 0.2]).is_err());
        assert!(auc(&[1.0, 0.0], &[f64::NAN, 0.2]).is_err());
    }

    proptest! {
        #[test]
        fn rank_formula_matches_pair_counting(
            rows in prop::collection::vec((0u8..2, 0u8..12), 2..200)
        ) {
            let labels: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
            // Coarse scores force plenty of ties.
            let scores: Vec<f64> = rows.iter().map(|r| r.1 as f64 / 11.0).collect();
            match auc(&labels, &scores) {
                Ok(a) => prop_assert!((a - pair_count(&labels, &scores)).abs() < 1e-12),
                Err(e) => prop_assert!(matches!(e, Error::Undefined(_))),
            }
        }

        #[test]
        fn auc_invariant_under_increasing_transforms(
            rows in prop::collection::vec((0u8..2, -5.0f64..5.0), 2..100)
        ) {
            let labels: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
            let scores: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let moved: Vec<f64> = scores.iter().map(|s| s.exp() * 3.0 + 1.0).collect();
            if let (Ok(a), Ok(b)) = (auc(&labels, &scores), auc(&labels, &moved)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
