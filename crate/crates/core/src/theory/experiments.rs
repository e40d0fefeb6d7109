//! Seeded simulation studies built on the estimators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{gen_multi_env, EnvConfig, EnvDataset};
use super::eills::eills_fit_smallp;
use super::lasso::lasso_fit;
use super::ols::{oracle_ols_fit, single_env_ols_fit};
use crate::error::{Error, Result};

/// Derives an independent stream seed from a base seed and a tag.
fn mix(seed: u64, tag: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (m, sd)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub n_grid: Vec<usize>,
    pub p_grid: Vec<usize>,
    pub s_star: usize,
    pub trials: usize,
    pub seed: u64,
    pub noise_sd: f64,
    /// Lasso uses `λ = c·√(log p / n)`. When unset, `c` is calibrated on the
    /// smallest cell by minimising mean error over [`C_GRID`].
    pub lasso_c: Option<f64>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            n_grid: vec![1000],
            p_grid: vec![200, 1000, 5000],
            s_star: 20,
            trials: 50,
            seed: 0,
            noise_sd: 1.0,
            lasso_c: None,
        }
    }
}

/// Candidate constants for the Lasso penalty calibration.
pub const C_GRID: [f64; 16] = [
    0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.2, 1.5, 2.0, 2.5, 3.0,
];
const CALIBRATION_TRIALS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub method: String,
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub mean_err: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub lasso_c: f64,
    pub rows: Vec<RateRow>,
}

impl ConvergenceTable {
    pub fn get(&self, method: &str, n: usize, p: usize) -> Option<&RateRow> {
        self.rows.iter().find(|r| r.method == method && r.n == n && r.p == p)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,n,p,s,mean_err,sd\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{:.6e},{:.6e}\n", r.method, r.n, r.p, r.s, r.mean_err, r.sd));
        }
        s
    }
}

fn lasso_lambda(c: f64, n: usize, p: usize) -> f64 {
    c * ((p as f64).ln() / n as f64).sqrt()
}

fn single_env(n: usize, p: usize, s: usize, noise_sd: f64, seed: u64) -> Result<EnvDataset> {
    let mut v = gen_multi_env(&EnvConfig {
        n,
        p,
        s_star: s,
        n_envs: 1,
        shift_strength: 0.0,
        noise_sd,
        spurious: false,
        seed,
    })?;
    Ok(v.remove(0))
}

fn calibrate_c(cfg: &ConvergenceConfig, n: usize, p: usize) -> Result<f64> {
    let data: Vec<EnvDataset> = (0..CALIBRATION_TRIALS.min(cfg.trials).max(1))
        .map(|t| single_env(n, p, cfg.s_star, cfg.noise_sd, mix(cfg.seed, 0xCA11_0000 + t as u64)))
        .collect::<Result<_>>()?;
    let mut best = (f64::INFINITY, C_GRID[0]);
    for &c in &C_GRID {
        let errs: Vec<f64> = data
            .par_iter()
            .map(|d| Ok(lasso_fit(&d.x, &d.y, lasso_lambda(c, n, p))?.l2_error(&d.beta_star)))
            .collect::<Result<_>>()?;
        let (m, _) = mean_sd(&errs);
        if m < best.0 {
            best = (m, c);
        }
    }
    tracing::info!(c = best.1, err = best.0, "calibrated lasso constant");
    Ok(best.1)
}

/// Mean ℓ₂ error of Lasso and oracle OLS for every `(n, p)` cell, plus the
/// theoretical curves `√(s log p / n)` and `√(s / n)`.
pub fn convergence_experiment(cfg: &ConvergenceConfig) -> Result<ConvergenceTable> {
    if cfg.n_grid.is_empty() || cfg.p_grid.is_empty() || cfg.trials == 0 {
        return Err(Error::validation("grids and trial count must be non-empty"));
    }
    let n0 = *cfg.n_grid.iter().min().unwrap();
    let p0 = *cfg.p_grid.iter().min().unwrap();
    let c = match cfg.lasso_c {
        Some(c) => c,
        None => calibrate_c(cfg, n0, p0)?,
    };
    let s = cfg.s_star;
    let mut rows = Vec::new();
    for &p in &cfg.p_grid {
        for &n in &cfg.n_grid {
            let errs: Vec<(f64, f64)> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let tag = ((n as u64) << 40) ^ ((p as u64) << 16) ^ t as u64;
                    let d = single_env(n, p, s, cfg.noise_sd, mix(cfg.seed, tag))?;
                    let lasso = lasso_fit(&d.x, &d.y, lasso_lambda(c, n, p))?;
                    let oracle = oracle_ols_fit(&d.x, &d.y, &d.support)?;
                    Ok((lasso.l2_error(&d.beta_star), oracle.l2_error(&d.beta_star)))
                })
                .collect::<Result<_>>()?;
            let lasso: Vec<f64> = errs.iter().map(|e| e.0).collect();
            let oracle: Vec<f64> = errs.iter().map(|e| e.1).collect();
            for (method, v) in [("lasso", &lasso), ("oracle_ols", &oracle)] {
                let (mean_err, sd) = mean_sd(v);
                rows.push(RateRow { method: method.into(), n, p, s, mean_err, sd });
            }
            let (nf, sf) = (n as f64, s as f64);
            rows.push(RateRow {
                method: "theory_lasso".into(),
                n,
                p,
                s,
                mean_err: (sf * (p as f64).ln() / nf).sqrt(),
                sd: 0.0,
            });
            rows.push(RateRow {
                method: "theory_oracle".into(),
                n,
                p,
                s,
                mean_err: (sf / nf).sqrt(),
                sd: 0.0,
            });
        }
    }
    Ok(ConvergenceTable { lasso_c: c, rows })
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    Ok(crate::eval::ols_line(&lx, &ly)?.slope)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearRateRow {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    /// `n^{−2/(2+p)}`
    pub full: f64,
    /// `n^{−2/(2+s)}`
    pub oracle: f64,
}

/// Closed-form nonparametric rates with and without knowledge of the
/// support, for plotting. Nothing is fit.
pub fn rate_curves_nonlinear(n_grid: &[usize], s_star: usize, p_grid: &[usize]) -> Vec<NonlinearRateRow> {
    let mut rows = Vec::new();
    for &p in p_grid {
        for &n in n_grid {
            let nf = n as f64;
            rows.push(NonlinearRateRow {
                n,
                p,
                s: s_star,
                full: nf.powf(-2.0 / (2.0 + p as f64)),
                oracle: nf.powf(-2.0 / (2.0 + s_star as f64)),
            });
        }
    }
    rows
}

pub fn nonlinear_csv(rows: &[NonlinearRateRow]) -> String {
    let mut s = String::from("n,p,s,full,oracle\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{:.6e},{:.6e}\n", r.n, r.p, r.s, r.full, r.oracle));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub trials: usize,
    pub env: EnvConfig,
    /// Weight of the invariance term. `R` and `J` are sums over rows, so
    /// `γ` here corresponds to `γ·n` in a per-row-mean formulation.
    pub gamma: f64,
    /// `None` uses `ln(total rows)`, a BIC-style penalty for unit noise.
    pub lambda: Option<f64>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            trials: 50,
            env: EnvConfig::default(),
            gamma: 0.01,
            lambda: None,
        }
    }
}

impl SelectionConfig {
    fn lambda(&self) -> f64 {
        self.lambda
            .unwrap_or_else(|| ((self.env.n * self.env.n_envs) as f64).ln() * self.env.noise_sd.powi(2).max(1e-12))
    }

    fn draw(&self, t: usize) -> Result<Vec<EnvDataset>> {
        gen_multi_env(&EnvConfig {
            seed: mix(self.env.seed, t as u64),
            ..self.env.clone()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub trials: usize,
    pub gamma: f64,
    pub lambda: f64,
    /// Trials whose selected support equals the true one exactly.
    pub exact: usize,
    pub rate: f64,
}

/// How often the EILLS enumeration recovers the true support.
pub fn selection_experiment(cfg: &SelectionConfig) -> Result<SelectionReport> {
    if cfg.trials == 0 {
        return Err(Error::validation("need at least one trial"));
    }
    let lambda = cfg.lambda();
    let hits: Vec<bool> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let envs = cfg.draw(t)?;
            let fit = eills_fit_smallp(&envs, cfg.gamma, lambda)?;
            Ok(fit.report.support == envs[0].support)
        })
        .collect::<Result<_>>()?;
    let exact = hits.iter().filter(|h| **h).count();
    Ok(SelectionReport {
        trials: cfg.trials,
        gamma: cfg.gamma,
        lambda,
        exact,
        rate: exact as f64 / cfg.trials as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpuriousReport {
    pub trials: usize,
    pub gamma: f64,
    pub lambda: f64,
    /// Share of trials where OLS on environment 0 alone selects the
    /// spurious column.
    pub ols_rate: f64,
    /// Same for EILLS on all environments.
    pub eills_rate: f64,
    /// Share of trials where EILLS returns the true support exactly.
    pub eills_exact_rate: f64,
}

/// Spurious-column construction: compares single-environment OLS with
/// EILLS on how often the extra column (index `p`) is selected.
pub fn spurious_experiment(cfg: &SelectionConfig) -> Result<SpuriousReport> {
    if cfg.trials == 0 {
        return Err(Error::validation("need at least one trial"));
    }
    let cfg = SelectionConfig {
        env: EnvConfig { spurious: true, ..cfg.env.clone() },
        ..cfg.clone()
    };
    if cfg.env.n_envs < 2 {
        return Err(Error::validation("the spurious construction needs two or more environments"));
    }
    let lambda = cfg.lambda();
    let spur = cfg.env.p;
    let outcomes: Vec<(bool, bool, bool)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let envs = cfg.draw(t)?;
            let ols = single_env_ols_fit(&envs[0].x, &envs[0].y)?;
            let eills = eills_fit_smallp(&envs, cfg.gamma, lambda)?;
            Ok((
                ols.support.contains(&spur),
                eills.report.support.contains(&spur),
                eills.report.support == envs[0].support,
            ))
        })
        .collect::<Result<_>>()?;
    let rate = |f: fn(&(bool, bool, bool)) -> bool| {
        outcomes.iter().filter(|o| f(o)).count() as f64 / cfg.trials as f64
    };
    Ok(SpuriousReport {
        trials: cfg.trials,
        gamma: cfg.gamma,
        lambda,
        ols_rate: rate(|o| o.0),
        eills_rate: rate(|o| o.1),
        eills_exact_rate: rate(|o| o.2),
    })
}

/// The spurious experiment repeated over a grid of `γ` values.
pub fn gamma_sweep(cfg: &SelectionConfig, gammas: &[f64]) -> Result<Vec<SpuriousReport>> {
    gammas
        .iter()
        .map(|&gamma| spurious_experiment(&SelectionConfig { gamma, ..cfg.clone() }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theory_curve_ratio_at_e4() {
        let p = 4f64.exp();
        let ratio = (20.0 * p.ln() / 1000.0f64).sqrt() / (20.0 / 1000.0f64).sqrt();
        assert!((ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nonlinear_curves() {
        let rows = rate_curves_nonlinear(&[100, 10_000], 20, &[20, 100]);
        assert_eq!(rows[0].full, rows[0].oracle);
        let r = &rows[3];
        assert_eq!((r.n, r.p), (10_000, 100));
        assert!((r.oracle - 10_000f64.powf(-2.0 / 22.0)).abs() < 1e-15);
        assert!((r.full - 10_000f64.powf(-2.0 / 102.0)).abs() < 1e-15);
        assert!(r.oracle < r.full);
        assert!(rows[2].full > rows[3].full);
        assert!(nonlinear_csv(&rows).starts_with("n,p,s,full,oracle\n"));
    }

    #[test]
    fn small_convergence_run_is_seeded() {
        let cfg = ConvergenceConfig {
            n_grid: vec![100],
            p_grid: vec![30],
            s_star: 3,
            trials: 4,
            ..ConvergenceConfig::default()
        };
        let a = convergence_experiment(&cfg).unwrap();
        assert_eq!(a, convergence_experiment(&cfg).unwrap());
        assert_eq!(a.rows.len(), 4);
        assert!(C_GRID.contains(&a.lasso_c));
        assert!(a.to_csv().starts_with("method,n,p,s,mean_err,sd\n"));
        let o = a.get("oracle_ols", 100, 30).unwrap();
        assert!(o.mean_err > 0.0 && o.mean_err < a.get("lasso", 100, 30).unwrap().mean_err + 0.5);
    }

    #[test]
    fn log_log_slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((log_log_slope(&x, &y).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn tiny_selection_run() {
        let cfg = SelectionConfig {
            trials: 3,
            env: EnvConfig { n: 200, p: 5, s_star: 2, ..EnvConfig::default() },
            ..SelectionConfig::default()
        };
        let r = selection_experiment(&cfg).unwrap();
        assert_eq!(r.trials, 3);
        assert!((0.0..=1.0).contains(&r.rate));
        let s = spurious_experiment(&cfg).unwrap();
        assert!((0.0..=1.0).contains(&s.ols_rate));
    }
}
