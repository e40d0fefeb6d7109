//! Least squares on a column subset via the normal equations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lasso,
    OracleOls,
    Eills,
    SingleEnvOls,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Lasso => "lasso",
            Method::OracleOls => "oracle_ols",
            Method::Eills => "eills",
            Method::SingleEnvOls => "single_env_ols",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: Method,
    pub beta: Vec<f64>,
    pub support: Vec<usize>,
    /// False when an iterative solver stopped at its sweep limit.
    pub converged: bool,
}

impl EstimateReport {
    pub fn l2_error(&self, beta_star: &[f64]) -> f64 {
        self.beta
            .iter()
            .zip(beta_star)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Smallest acceptable ratio of the extreme Cholesky pivots, squared.
const RANK_TOL: f64 = 1e-12;

/// Solves `a · b = rhs` for symmetric positive-definite `a`, refusing
/// numerically singular systems.
pub(crate) fn spd_solve(a: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::validation("design is rank-deficient on the requested columns"))?;
    let d = chol.l_dirty().diagonal();
    let (lo, hi) = (d.min(), d.max());
    if !(lo > 0.0) || (lo / hi).powi(2) < RANK_TOL {
        return Err(Error::validation("design is numerically rank-deficient on the requested columns"));
    }
    Ok(chol.solve(rhs))
}

pub(crate) fn select_columns(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    x.select_columns(cols)
}

/// OLS on the columns in `support`, zeros elsewhere.
pub fn restricted_ols(x: &DMatrix<f64>, y: &DVector<f64>, support: &[usize]) -> Result<Vec<f64>> {
    if x.nrows() != y.len() {
        return Err(Error::validation("X and y disagree on the number of rows"));
    }
    if support.iter().any(|&j| j >= x.ncols()) {
        return Err(Error::validation("support index out of range"));
    }
    if support.len() > x.nrows() {
        return Err(Error::validation("support larger than the sample"));
    }
    let mut beta = vec![0.0; x.ncols()];
    if support.is_empty() {
        return Ok(beta);
    }
    let xs = select_columns(x, support);
    let b = spd_solve(xs.tr_mul(&xs), &xs.tr_mul(y))?;
    for (k, &j) in support.iter().enumerate() {
        beta[j] = b[k];
    }
    Ok(beta)
}

/// OLS restricted to the known support; every other coefficient is fixed
/// at zero.
pub fn oracle_ols_fit(x: &DMatrix<f64>, y: &DVector<f64>, support: &[usize]) -> Result<EstimateReport> {
    let beta = restricted_ols(x, y, support)?;
    Ok(EstimateReport {
        method: Method::OracleOls,
        beta,
        support: support.to_vec(),
        converged: true,
    })
}

/// Two-sided critical value for the single-environment t-tests (5% level).
pub const T_CRIT: f64 = 1.96;

/// Full OLS on one environment. A coefficient is in the support when its
/// t-statistic exceeds [`T_CRIT`] in absolute value.
pub fn single_env_ols_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<EstimateReport> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::validation("single-environment OLS needs n > p"));
    }
    let all: Vec<usize> = (0..p).collect();
    let beta = restricted_ols(x, y, &all)?;
    let b = DVector::from_vec(beta.clone());
    let resid = y - x * &b;
    let sigma2 = resid.norm_squared() / (n - p) as f64;
    let inv = x
        .tr_mul(x)
        .try_inverse()
        .ok_or_else(|| Error::validation("design is rank-deficient"))?;
    let support = (0..p)
        .filter(|&j| beta[j].abs() / (sigma2 * inv[(j, j)]).sqrt() > T_CRIT)
        .collect();
    Ok(EstimateReport {
        method: Method::SingleEnvOls,
        beta,
        support,
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::{gen_multi_env, EnvConfig};

    #[test]
    fn noiseless_recovery_and_orthogonal_residuals() {
        let envs = gen_multi_env(&EnvConfig { noise_sd: 0.0, n_envs: 1, ..EnvConfig::default() }).unwrap();
        let e = &envs[0];
        let r = oracle_ols_fit(&e.x, &e.y, &e.support).unwrap();
        assert!(r.l2_error(&e.beta_star) < 1e-10);

        let noisy = &gen_multi_env(&EnvConfig { n_envs: 1, ..EnvConfig::default() }).unwrap()[0];
        let r = oracle_ols_fit(&noisy.x, &noisy.y, &noisy.support).unwrap();
        let resid = &noisy.y - &noisy.x * DVector::from_vec(r.beta.clone());
        for &j in &noisy.support {
            assert!(noisy.x.column(j).dot(&resid).abs() < 1e-8);
        }
        for j in 3..8 {
            assert_eq!(r.beta[j], 0.0);
        }
    }

    #[test]
    fn full_support_is_plain_ols() {
        let e = &gen_multi_env(&EnvConfig { n_envs: 1, ..EnvConfig::default() }).unwrap()[0];
        let all: Vec<usize> = (0..8).collect();
        let a = oracle_ols_fit(&e.x, &e.y, &all).unwrap().beta;
        let qr = e.x.clone().qr();
        let b = qr.r().solve_upper_triangular(&qr.q().tr_mul(&e.y)).unwrap();
        for j in 0..8 {
            assert!((a[j] - b[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn rank_deficient_is_an_error() {
        let mut x = DMatrix::<f64>::from_fn(10, 2, |i, _| i as f64);
        x[(1, 1)] = 5.0;
        let y = DVector::from_element(10, 1.0);
        assert!(oracle_ols_fit(&x, &y, &[0, 1]).is_ok());
        let dup = DMatrix::<f64>::from_fn(10, 2, |i, _| i as f64);
        assert!(oracle_ols_fit(&dup, &y, &[0, 1]).is_err());
    }

    #[test]
    fn wide_design_only_needs_the_support() {
        let e = &gen_multi_env(&EnvConfig { n: 100, p: 300, s_star: 5, n_envs: 1, ..EnvConfig::default() })
            .unwrap()[0];
        let r = oracle_ols_fit(&e.x, &e.y, &e.support).unwrap();
        assert!(r.l2_error(&e.beta_star) < 1.0);
        assert!(single_env_ols_fit(&e.x, &e.y).is_err());
    }
}
