//! Environment-invariant least squares with an ℓ₀ penalty.
//!
//! `R(β)` is the squared error summed over every row of every environment.
//! `J(β)` sums, over the nonzero coordinates `j` and every environment, the
//! squared inner product of column `j` with that environment's residuals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::data::EnvDataset;
use super::ols::{spd_solve, EstimateReport, Method};
use crate::error::{Error, Result};

/// Largest `p` accepted by the exhaustive support search.
pub const EILLS_MAX_P: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EillsParts {
    pub risk: f64,
    pub invariance: f64,
    pub l0: usize,
}

impl EillsParts {
    pub fn total(&self, gamma: f64, lambda: f64) -> f64 {
        self.risk + gamma * self.invariance + lambda * self.l0 as f64
    }
}

fn check_envs(envs: &[EnvDataset], p: usize) -> Result<()> {
    if envs.is_empty() {
        return Err(Error::validation("need at least one environment"));
    }
    if envs.iter().any(|e| e.p() != p || e.x.nrows() != e.y.len()) {
        return Err(Error::validation("environments disagree on the number of columns"));
    }
    Ok(())
}

pub fn eills_parts(beta: &[f64], envs: &[EnvDataset]) -> Result<EillsParts> {
    check_envs(envs, beta.len())?;
    let b = DVector::from_column_slice(beta);
    let mut risk = 0.0;
    let mut invariance = 0.0;
    for e in envs {
        let r = &e.y - &e.x * &b;
        risk += r.norm_squared();
        let xr = e.x.tr_mul(&r);
        invariance += beta
            .iter()
            .zip(xr.iter())
            .filter(|(bj, _)| **bj != 0.0)
            .map(|(_, v)| v * v)
            .sum::<f64>();
    }
    Ok(EillsParts {
        risk,
        invariance,
        l0: beta.iter().filter(|v| **v != 0.0).count(),
    })
}

/// `R(β) + γ·J(β) + λ·‖β‖₀`.
pub fn eills_objective(beta: &[f64], envs: &[EnvDataset], gamma: f64, lambda: f64) -> Result<f64> {
    if !(gamma >= 0.0 && lambda >= 0.0) {
        return Err(Error::validation("gamma and lambda must be non-negative"));
    }
    Ok(eills_parts(beta, envs)?.total(gamma, lambda))
}

#[derive(Debug, Clone)]
pub struct EillsFit {
    pub report: EstimateReport,
    pub objective: f64,
    /// Supports whose restricted system was singular and were skipped.
    pub skipped: usize,
}

struct Moments {
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
}

/// Exhaustive search over all `2^p` supports. For each support the
/// restricted objective `R + γJ` is a quadratic in `β_S`, minimised exactly
/// by one linear solve; `λ·|S|` is added and the global best is returned.
/// Ties go to the support enumerated first (smaller bitmask).
pub fn eills_fit_smallp(envs: &[EnvDataset], gamma: f64, lambda: f64) -> Result<EillsFit> {
    if !(gamma >= 0.0 && lambda >= 0.0) {
        return Err(Error::validation("gamma and lambda must be non-negative"));
    }
    let p = envs.first().map(EnvDataset::p).unwrap_or(0);
    check_envs(envs, p)?;
    if p > EILLS_MAX_P {
        return Err(Error::validation(format!(
            "support enumeration is limited to p ≤ {EILLS_MAX_P} (got {p})"
        )));
    }
    let moments: Vec<Moments> = envs
        .iter()
        .map(|e| Moments {
            gram: e.x.tr_mul(&e.x),
            xty: e.x.tr_mul(&e.y),
            yty: e.y.norm_squared(),
        })
        .collect();
    let base: f64 = moments.iter().map(|m| m.yty).sum();

    let mut best = (base, 0u32, vec![0.0; p]);
    let mut skipped = 0;
    for mask in 1u32..(1 << p) {
        let s: Vec<usize> = (0..p).filter(|j| mask >> j & 1 == 1).collect();
        let k = s.len();
        let mut a = DMatrix::<f64>::zeros(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        let mut blocks = Vec::with_capacity(moments.len());
        for m in &moments {
            let g = m.gram.select_rows(&s).select_columns(&s);
            let c = m.xty.select_rows(&s);
            a += &g + gamma * g.tr_mul(&g);
            rhs += &c + gamma * g.tr_mul(&c);
            blocks.push((g, c, m.yty));
        }
        let b = match spd_solve(a, &rhs) {
            Ok(b) => b,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let mut value = lambda * k as f64;
        for (g, c, yty) in &blocks {
            let gb = g * &b;
            value += yty - 2.0 * b.dot(c) + b.dot(&gb);
            value += gamma * (c - gb).norm_squared();
        }
        if value < best.0 {
            let mut beta = vec![0.0; p];
            for (i, &j) in s.iter().enumerate() {
                beta[j] = b[i];
            }
            best = (value, mask, beta);
        }
    }
    if skipped > 0 {
        tracing::warn!(skipped, "singular supports skipped in EILLS enumeration");
    }
    let (objective, mask, beta) = best;
    Ok(EillsFit {
        report: EstimateReport {
            method: Method::Eills,
            beta,
            support: (0..p).filter(|j| mask >> j & 1 == 1).collect(),
            converged: true,
        },
        objective,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::{gen_multi_env, EnvConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn envs(seed: u64, noise: f64) -> Vec<EnvDataset> {
        gen_multi_env(&EnvConfig { n: 40, p: 5, s_star: 2, noise_sd: noise, seed, ..EnvConfig::default() })
            .unwrap()
    }

    #[test]
    fn truth_without_noise_costs_only_the_l0_term() {
        let e = envs(1, 0.0);
        let b = e[0].beta_star.clone();
        let parts = eills_parts(&b, &e).unwrap();
        assert!(parts.risk < 1e-20 && parts.invariance < 1e-16);
        assert!((eills_objective(&b, &e, 3.0, 0.7).unwrap() - 1.4).abs() < 1e-9);
    }

    #[test]
    fn zero_penalties_give_pooled_rss() {
        let e = envs(2, 1.0);
        let b = vec![0.3, -0.1, 0.0, 2.0, 0.5];
        let rss: f64 = e
            .iter()
            .map(|d| (&d.y - &d.x * DVector::from_vec(b.clone())).norm_squared())
            .sum();
        assert_eq!(eills_objective(&b, &e, 0.0, 0.0).unwrap(), rss);
    }

    #[test]
    fn enumeration_beats_random_points_on_its_support() {
        let e = envs(3, 1.0);
        let (gamma, lambda) = (0.01, 5.0);
        let fit = eills_fit_smallp(&e, gamma, lambda).unwrap();
        let got = eills_objective(&fit.report.beta, &e, gamma, lambda).unwrap();
        assert!((got - fit.objective).abs() < 1e-6 * got.max(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let b: Vec<f64> = (0..5)
                .map(|_| if rng.gen_bool(0.5) { rng.gen_range(-2.0..2.0) } else { 0.0 })
                .collect();
            assert!(eills_objective(&b, &e, gamma, lambda).unwrap() >= fit.objective - 1e-9);
        }
    }

    #[test]
    fn single_env_without_invariance_is_best_subset() {
        let e = gen_multi_env(&EnvConfig { n_envs: 1, n: 60, p: 4, s_star: 2, seed: 5, ..EnvConfig::default() })
            .unwrap();
        let lambda = 1e-6;
        let fit = eills_fit_smallp(&e, 0.0, lambda).unwrap();
        let mut best = f64::INFINITY;
        for mask in 0u32..16 {
            let s: Vec<usize> = (0..4).filter(|j| mask >> j & 1 == 1).collect();
            let b = super::super::ols::restricted_ols(&e[0].x, &e[0].y, &s).unwrap();
            best = best.min(eills_objective(&b, &e, 0.0, lambda).unwrap());
        }
        assert!((fit.objective - best).abs() < 1e-8 * best);
    }

    #[test]
    fn large_p_rejected() {
        let e = gen_multi_env(&EnvConfig { p: 15, n: 20, ..EnvConfig::default() }).unwrap();
        assert!(eills_fit_smallp(&e, 1.0, 1.0).is_err());
        assert!(eills_objective(&[0.0; 3], &e, 1.0, 1.0).is_err());
    }
}
