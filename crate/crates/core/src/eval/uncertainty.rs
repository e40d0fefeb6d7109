//! Disagreement across independently trained models, and its relation to
//! per-record improvement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-record population variance across the `K` rows of `preds`
/// (`K × N`), min-max normalised over the records. Constant variances map
/// to all zeros with a warning.
pub fn uncertainty_scores(preds: &[Vec<f64>]) -> Result<Vec<f64>> {
    if preds.len() < 2 {
        return Err(Error::validation("uncertainty needs at least two models"));
    }
    let n = preds[0].len();
    if n == 0 || preds.iter().any(|r| r.len() != n) {
        return Err(Error::validation("prediction rows must be non-empty and of equal length"));
    }
    let k = preds.len() as f64;
    let var: Vec<f64> = (0..n)
        .map(|j| {
            let mean = preds.iter().map(|r| r[j]).sum::<f64>() / k;
            preds.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / k
        })
        .collect();
    Ok(min_max(&var))
}

/// Min-max normalisation to `[0, 1]`; a constant input maps to zeros.
pub fn min_max(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        tracing::warn!("constant input to min-max normalisation; all scores set to 0");
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation; `None` when the response is constant.
    pub r: Option<f64>,
}

/// Least-squares line of `y` on `x`.
pub fn ols_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() < 3 || x.len() != y.len() {
        return Err(Error::validation("line fit needs at least three paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Undefined("slope of a zero-variance regressor".into()));
    }
    let slope = sxy / sxx;
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
        r: (syy > 0.0).then(|| sxy / (sxx * syy).sqrt()),
    })
}

/// Regresses the per-record improvement `baseline_err − model_err` on the
/// normalised uncertainty.
pub fn improvement_vs_uncertainty(
    baseline_errors: &[f64],
    model_errors: &[f64],
    uncertainty: &[f64],
) -> Result<LineFit> {
    if baseline_errors.len() != model_errors.len() {
        return Err(Error::validation("error vectors differ in length"));
    }
    let improvement: Vec<f64> = baseline_errors
        .iter()
        .zip(model_errors)
        .map(|(b, m)| b - m)
        .collect();
    ols_line(uncertainty, &improvement)
}
