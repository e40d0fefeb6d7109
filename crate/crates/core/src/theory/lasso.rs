//! Lasso by cyclic coordinate descent on standardised columns.
//!
//! Minimises `(1/2n)‖ỹ − X̃b‖² + λ‖b‖₁` where `X̃` has centred columns with
//! unit mean square and `ỹ` is centred (an unpenalised intercept). The
//! returned coefficients are mapped back to the original column scale.

use nalgebra::{DMatrix, DVector};

use super::ols::{EstimateReport, Method};
use crate::error::{Error, Result};

pub const LASSO_TOL: f64 = 1e-8;
pub const LASSO_MAX_SWEEPS: usize = 10_000;
/// Coefficients at or below this magnitude are outside the support.
pub const SUPPORT_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LassoFit {
    pub report: EstimateReport,
    /// Objective value after each sweep (full or active-set).
    pub objective_trace: Vec<f64>,
    pub sweeps: usize,
}

fn soft(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Centres and scales the columns; zero-variance columns get scale 0.
pub fn standardize(x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    let mut xs = x.clone();
    let mut means = Vec::with_capacity(x.ncols());
    let mut scales = Vec::with_capacity(x.ncols());
    for mut col in xs.column_iter_mut() {
        let m = col.sum() / n;
        col.add_scalar_mut(-m);
        let s = (col.norm_squared() / n).sqrt();
        if s > 0.0 {
            col /= s;
        }
        means.push(m);
        scales.push(s);
    }
    (xs, means, scales)
}

/// Smallest λ with an all-zero solution: `max_j |X̃_jᵀỹ| / n`.
pub fn lambda_max(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let (xs, _, _) = standardize(x);
    let yc = y.add_scalar(-y.mean());
    (xs.tr_mul(&yc) / x.nrows() as f64).amax()
}

pub fn lasso_fit(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<EstimateReport> {
    Ok(lasso_fit_traced(x, y, lambda)?.report)
}

pub fn lasso_fit_traced(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<LassoFit> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::validation("lambda must be finite and non-negative"));
    }
    let (n, p) = x.shape();
    if n == 0 || n != y.len() {
        return Err(Error::validation("X and y disagree on the number of rows"));
    }
    let (xs, _, scales) = standardize(x);
    let nf = n as f64;
    let mut r = y.add_scalar(-y.mean());
    let mut b = vec![0.0; p];
    let objective = |r: &DVector<f64>, b: &[f64]| {
        r.norm_squared() / (2.0 * nf) + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
    };
    let mut trace = vec![objective(&r, &b)];
    let mut sweeps = 0;
    let mut converged = false;

    // One pass over `cols`; returns the largest coefficient change.
    let sweep = |cols: &[usize], b: &mut [f64], r: &mut DVector<f64>| {
        let mut max_change: f64 = 0.0;
        for &j in cols {
            if scales[j] == 0.0 {
                continue;
            }
            let col = xs.column(j);
            let old = b[j];
            let new = soft(old + col.dot(r) / nf, lambda);
            if new != old {
                r.axpy(old - new, &col, 1.0);
                b[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        max_change
    };

    let all: Vec<usize> = (0..p).collect();
    'outer: while sweeps < LASSO_MAX_SWEEPS {
        let change = sweep(&all, &mut b, &mut r);
        sweeps += 1;
        trace.push(objective(&r, &b));
        if change < LASSO_TOL {
            converged = true;
            break;
        }
        let active: Vec<usize> = (0..p).filter(|&j| b[j] != 0.0).collect();
        loop {
            if sweeps >= LASSO_MAX_SWEEPS {
                break 'outer;
            }
            let change = sweep(&active, &mut b, &mut r);
            sweeps += 1;
            trace.push(objective(&r, &b));
            if change < LASSO_TOL {
                break;
            }
        }
    }
    if !converged {
        tracing::warn!(sweeps, "lasso stopped at the sweep limit before converging");
    }
    let beta: Vec<f64> = b
        .iter()
        .zip(&scales)
        .map(|(v, s)| if *s > 0.0 { v / s } else { 0.0 })
        .collect();
    let support = (0..p).filter(|&j| beta[j].abs() > SUPPORT_TOL).collect();
    Ok(LassoFit {
        report: EstimateReport {
            method: Method::Lasso,
            beta,
            support,
            converged,
        },
        objective_trace: trace,
        sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::{gen_multi_env, EnvConfig};
    use proptest::prelude::*;

    fn intercept_ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Vec<f64> {
        let (n, p) = x.shape();
        let mut a = DMatrix::from_element(n, p + 1, 1.0);
        a.view_mut((0, 1), (n, p)).copy_from(x);
        let qr = a.qr();
        let b = qr.r().solve_upper_triangular(&qr.q().tr_mul(y)).unwrap();
        b.as_slice()[1..].to_vec()
    }

    #[test]
    fn zero_penalty_matches_ols() {
        let e = &gen_multi_env(&EnvConfig { n_envs: 1, n: 200, ..EnvConfig::default() }).unwrap()[0];
        let fit = lasso_fit(&e.x, &e.y, 0.0).unwrap();
        assert!(fit.converged);
        for (a, b) in fit.beta.iter().zip(intercept_ols(&e.x, &e.y)) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn kill_condition() {
        let e = &gen_multi_env(&EnvConfig { n_envs: 1, n: 100, ..EnvConfig::default() }).unwrap()[0];
        let lm = lambda_max(&e.x, &e.y);
        let fit = lasso_fit(&e.x, &e.y, lm).unwrap();
        assert!(fit.beta.iter().all(|b| *b == 0.0) && fit.support.is_empty());
        assert!(!lasso_fit(&e.x, &e.y, 0.9 * lm).unwrap().support.is_empty());
    }

    #[test]
    fn orthonormal_design_soft_thresholds_ols() {
        // Centred columns with XᵀX = n·I.
        let e = &gen_multi_env(&EnvConfig { n_envs: 1, n: 64, p: 5, s_star: 3, ..EnvConfig::default() })
            .unwrap()[0];
        let n = 64.0f64;
        let (xc, _, _) = standardize(&e.x);
        let q = xc.qr().q() * n.sqrt();
        let y = e.y.clone();
        let yc = y.add_scalar(-y.mean());
        let lambda = 0.3;
        let fit = lasso_fit(&q, &y, lambda).unwrap();
        for j in 0..5 {
            let ols = q.column(j).dot(&yc) / n;
            assert!((fit.beta[j] - soft(ols, lambda)).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_negative_lambda() {
        let x = DMatrix::<f64>::identity(3, 2);
        assert!(lasso_fit(&x, &DVector::zeros(3), -1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn objective_never_increases(seed in 0u64..1000, frac in 0.0f64..1.0) {
            let e = &gen_multi_env(&EnvConfig { n_envs: 1, n: 40, p: 30, s_star: 4, seed, ..EnvConfig::default() })
                .unwrap()[0];
            let lambda = frac * lambda_max(&e.x, &e.y);
            let fit = lasso_fit_traced(&e.x, &e.y, lambda).unwrap();
            for w in fit.objective_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }
}
