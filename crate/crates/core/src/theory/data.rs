//! Multi-environment linear data.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One environment's sample. Every environment of a draw shares `beta_star`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvDataset {
    pub env_id: usize,
    /// `n × p`, one row per observation.
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub beta_star: Vec<f64>,
    /// Indices with nonzero `beta_star`, ascending.
    pub support: Vec<usize>,
}

impl EnvDataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Rows per environment.
    pub n: usize,
    pub p: usize,
    pub s_star: usize,
    pub n_envs: usize,
    /// Environment `e` shifts every covariate mean by a draw from
    /// `uniform(−shift, shift)` and scales covariates by `1 + shift·e/2`.
    /// Environment 0 is always standard normal.
    pub shift_strength: f64,
    pub noise_sd: f64,
    /// Appends one extra column, index `p`, outside the support: in
    /// environment 0 it is `y` plus small noise, elsewhere independent noise.
    pub spurious: bool,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            n: 500,
            p: 8,
            s_star: 3,
            n_envs: 2,
            shift_strength: 0.5,
            noise_sd: 1.0,
            spurious: false,
            seed: 0,
        }
    }
}

/// Noise scale of the spurious column relative to `sd(y)` in environment 0.
pub const SPURIOUS_NOISE: f64 = 0.3;

/// `beta_star` has nonzeros on `0..s_star`, magnitudes `uniform(0.5, 1.5)`
/// with random signs.
pub fn gen_multi_env(cfg: &EnvConfig) -> Result<Vec<EnvDataset>> {
    if cfg.s_star > cfg.p || cfg.n_envs == 0 || cfg.n == 0 {
        return Err(Error::validation(
            "need s_star ≤ p, at least one environment and n ≥ 1",
        ));
    }
    if !(cfg.noise_sd >= 0.0 && cfg.shift_strength >= 0.0) {
        return Err(Error::validation("noise and shift must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut beta = vec![0.0; cfg.p];
    for b in beta.iter_mut().take(cfg.s_star) {
        let m: f64 = rng.gen_range(0.5..1.5);
        *b = if rng.gen_bool(0.5) { m } else { -m };
    }
    let support: Vec<usize> = (0..cfg.s_star).collect();
    let cols = cfg.p + cfg.spurious as usize;
    let mut beta_full = beta.clone();
    if cfg.spurious {
        beta_full.push(0.0);
    }
    let mut envs = Vec::with_capacity(cfg.n_envs);
    for e in 0..cfg.n_envs {
        let (mean, scale): (Vec<f64>, f64) = if e == 0 {
            (vec![0.0; cfg.p], 1.0)
        } else {
            let s = cfg.shift_strength;
            let m = (0..cfg.p)
                .map(|_| if s > 0.0 { rng.gen_range(-s..s) } else { 0.0 })
                .collect();
            (m, 1.0 + s * e as f64 / 2.0)
        };
        let mut x = DMatrix::<f64>::zeros(cfg.n, cols);
        // Column-major fill keeps the draw order independent of `n`'s layout.
        for j in 0..cfg.p {
            for i in 0..cfg.n {
                let z: f64 = rng.sample(StandardNormal);
                x[(i, j)] = mean[j] + scale * z;
            }
        }
        let mut y = DVector::<f64>::zeros(cfg.n);
        for i in 0..cfg.n {
            let z: f64 = rng.sample(StandardNormal);
            y[i] = (0..cfg.s_star).map(|j| x[(i, j)] * beta[j]).sum::<f64>() + cfg.noise_sd * z;
        }
        if cfg.spurious {
            let sd_y = (y.iter().map(|v| v * v).sum::<f64>() / cfg.n as f64).sqrt().max(1e-12);
            for i in 0..cfg.n {
                let z: f64 = rng.sample(StandardNormal);
                x[(i, cfg.p)] = if e == 0 {
                    y[i] + SPURIOUS_NOISE * sd_y * z
                } else {
                    sd_y * z
                };
            }
        }
        envs.push(EnvDataset {
            env_id: e,
            x,
            y,
            beta_star: beta_full.clone(),
            support: support.clone(),
        });
    }
    Ok(envs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_truth() {
        let envs = gen_multi_env(&EnvConfig { spurious: true, ..EnvConfig::default() }).unwrap();
        assert_eq!(envs.len(), 2);
        for e in &envs {
            assert_eq!((e.n(), e.p()), (500, 9));
            assert_eq!(e.support, vec![0, 1, 2]);
            for (j, b) in e.beta_star.iter().enumerate() {
                assert_eq!(*b != 0.0, e.support.contains(&j));
                if *b != 0.0 {
                    assert!((0.5..1.5).contains(&b.abs()));
                }
            }
        }
        assert_eq!(envs[0].beta_star, envs[1].beta_star);
    }

    #[test]
    fn seeded_and_noiseless() {
        let cfg = EnvConfig { noise_sd: 0.0, n_envs: 1, shift_strength: 0.0, ..EnvConfig::default() };
        let a = gen_multi_env(&cfg).unwrap();
        assert_eq!(a, gen_multi_env(&cfg).unwrap());
        let e = &a[0];
        let b = DVector::from_vec(e.beta_star.clone());
        assert!((&e.x * b - &e.y).amax() < 1e-12);
    }

    #[test]
    fn invalid_configs() {
        assert!(gen_multi_env(&EnvConfig { s_star: 9, ..EnvConfig::default() }).is_err());
        assert!(gen_multi_env(&EnvConfig { n_envs: 0, ..EnvConfig::default() }).is_err());
    }
}
