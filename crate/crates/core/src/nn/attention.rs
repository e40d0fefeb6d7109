//! Single-head scaled dot-product self-attention.
//!
//! Rows of the input are items; `Q = S·W^Q`, `K = S·W^K`, `V = S·W^V`,
//! `α = softmax_row(Q Kᵀ / √d_k)` and `Z = α V`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{softmax_in_place, Mat};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub wq: Mat,
    pub wk: Mat,
    pub wv: Mat,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    pub input: Mat,
    pub q: Mat,
    pub k: Mat,
    pub v: Mat,
    /// Row-stochastic attention weights, `n × n`.
    pub alpha: Mat,
}

pub type AttentionGrads = AttentionParams;

impl AttentionParams {
    pub fn new<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> Self {
        AttentionParams {
            wq: Mat::uniform(dim, dim, scale, rng),
            wk: Mat::uniform(dim, dim, scale, rng),
            wv: Mat::uniform(dim, dim, scale, rng),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        AttentionParams {
            wq: Mat::zeros(dim, dim),
            wk: Mat::zeros(dim, dim),
            wv: Mat::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.wq.cols
    }

    pub fn zeros_like(&self) -> Self {
        AttentionParams::zeros(self.dim())
    }

    pub fn forward(&self, input: &Mat) -> Result<(Mat, AttentionCache)> {
        if input.rows == 0 {
            return Err(Error::validation("self-attention needs at least one row"));
        }
        if !input.is_finite() {
            return Err(Error::numeric("self-attention input", 0));
        }
        let q = input.matmul(&self.wq);
        let k = input.matmul(&self.wk);
        let v = input.matmul(&self.wv);
        let scale = 1.0 / (k.cols as f64).sqrt();
        let mut alpha = q.matmul_t(&k);
        alpha.scale(scale);
        for r in 0..alpha.rows {
            softmax_in_place(alpha.row_mut(r));
        }
        let z = alpha.matmul(&v);
        if !z.is_finite() {
            return Err(Error::numeric("self-attention output", 1));
        }
        Ok((
            z,
            AttentionCache {
                input: input.clone(),
                q,
                k,
                v,
                alpha,
            },
        ))
    }

    /// Accumulates weight gradients into `grad`, returns `∂L/∂S`.
    pub fn backward(&self, cache: &AttentionCache, dz: &Mat, grad: &mut AttentionGrads) -> Mat {
        let alpha = &cache.alpha;
        let scale = 1.0 / (cache.k.cols as f64).sqrt();
        let dalpha = dz.matmul_t(&cache.v);
        let dv = alpha.t_matmul(dz);
        // softmax Jacobian, row by row
        let mut dscore = Mat::zeros(alpha.rows, alpha.cols);
        for r in 0..alpha.rows {
            let a = alpha.row(r);
            let da = dalpha.row(r);
            let inner: f64 = a.iter().zip(da).map(|(x, y)| x * y).sum();
            for (c, out) in dscore.row_mut(r).iter_mut().enumerate() {
                *out = a[c] * (da[c] - inner) * scale;
            }
        }
        let dq = dscore.matmul(&cache.k);
        let dk = dscore.t_matmul(&cache.q);
        grad.wq.add_assign(&cache.input.t_matmul(&dq));
        grad.wk.add_assign(&cache.input.t_matmul(&dk));
        grad.wv.add_assign(&cache.input.t_matmul(&dv));
        let mut ds = dq.matmul_t(&self.wq);
        ds.add_assign(&dk.matmul_t(&self.wk));
        ds.add_assign(&dv.matmul_t(&self.wv));
        ds
    }

    pub fn sgd_step(&mut self, grad: &AttentionGrads, lr: f64) {
        for (p, g) in [
            (&mut self.wq, &grad.wq),
            (&mut self.wk, &grad.wk),
            (&mut self.wv, &grad.wv),
        ] {
            for (w, d) in p.data.iter_mut().zip(&g.data) {
                *w -= lr * d;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.wq.is_finite() && self.wk.is_finite() && self.wv.is_finite()
    }
}
