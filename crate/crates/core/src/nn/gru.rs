//! Gated recurrent unit over a sequence of row vectors.
//!
//! The first hidden state is the first input (`h₁ = z₁`); every later step
//! applies the reset gate, update gate and candidate state and interpolates
//! `h_t = u_t ⊙ h_{t−1} + (1 − u_t) ⊙ h̃_t`. Only the final state is returned.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, Mat};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruParams {
    pub w_r: Mat,
    pub u_r: Mat,
    pub b_r: Vec<f64>,
    pub w_u: Mat,
    pub u_u: Mat,
    pub b_u: Vec<f64>,
    pub w_h: Mat,
    pub u_h: Mat,
    pub b_h: Vec<f64>,
}

#[derive(Debug, Clone)]
struct GruStep {
    z: Vec<f64>,
    h_prev: Vec<f64>,
    r: Vec<f64>,
    u: Vec<f64>,
    rh: Vec<f64>,
    cand: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GruCache {
    steps: Vec<GruStep>,
    len: usize,
}

impl GruParams {
    pub fn new<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> Self {
        let mut m = || Mat::uniform(dim, dim, scale, rng);
        GruParams {
            w_r: m(),
            u_r: m(),
            b_r: vec![0.0; dim],
            w_u: m(),
            u_u: m(),
            b_u: vec![0.0; dim],
            w_h: m(),
            u_h: m(),
            b_h: vec![0.0; dim],
        }
    }

    pub fn zeros(dim: usize) -> Self {
        GruParams {
            w_r: Mat::zeros(dim, dim),
            u_r: Mat::zeros(dim, dim),
            b_r: vec![0.0; dim],
            w_u: Mat::zeros(dim, dim),
            u_u: Mat::zeros(dim, dim),
            b_u: vec![0.0; dim],
            w_h: Mat::zeros(dim, dim),
            u_h: Mat::zeros(dim, dim),
            b_h: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.b_r.len()
    }

    pub fn zeros_like(&self) -> Self {
        GruParams::zeros(self.dim())
    }

    fn gate(w: &Mat, u: &Mat, b: &[f64], z: &[f64], h: &[f64]) -> Vec<f64> {
        let wz = w.mul_vec(z);
        let uh = u.mul_vec(h);
        wz.iter()
            .zip(&uh)
            .zip(b)
            .map(|((a, c), bb)| a + c + bb)
            .collect()
    }

    pub fn forward(&self, z: &Mat) -> Result<(Vec<f64>, GruCache)> {
        if z.rows == 0 {
            return Err(Error::validation("GRU needs at least one step"));
        }
        let mut h = z.row(0).to_vec();
        let mut steps = Vec::with_capacity(z.rows.saturating_sub(1));
        for t in 1..z.rows {
            let zt = z.row(t);
            let r: Vec<f64> = Self::gate(&self.w_r, &self.u_r, &self.b_r, zt, &h)
                .into_iter()
                .map(sigmoid)
                .collect();
            let u: Vec<f64> = Self::gate(&self.w_u, &self.u_u, &self.b_u, zt, &h)
                .into_iter()
                .map(sigmoid)
                .collect();
            let rh: Vec<f64> = r.iter().zip(&h).map(|(a, b)| a * b).collect();
            let cand: Vec<f64> = Self::gate(&self.w_h, &self.u_h, &self.b_h, zt, &rh)
                .into_iter()
                .map(f64::tanh)
                .collect();
            let next: Vec<f64> = (0..h.len())
                .map(|i| u[i] * h[i] + (1.0 - u[i]) * cand[i])
                .collect();
            steps.push(GruStep {
                z: zt.to_vec(),
                h_prev: std::mem::replace(&mut h, next),
                r,
                u,
                rh,
                cand,
            });
        }
        if h.iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric("GRU hidden state", 0));
        }
        Ok((
            h,
            GruCache {
                steps,
                len: z.rows,
            },
        ))
    }

    /// Backpropagates `∂L/∂h_n` through time; returns `∂L/∂Z`.
    pub fn backward(&self, cache: &GruCache, dh_last: &[f64], grad: &mut GruParams) -> Mat {
        let d = self.dim();
        let mut dz = Mat::zeros(cache.len, d);
        let mut dh = dh_last.to_vec();
        for (idx, s) in cache.steps.iter().enumerate().rev() {
            let t = idx + 1;
            let mut dh_prev: Vec<f64> = (0..d).map(|i| dh[i] * s.u[i]).collect();
            let du: Vec<f64> = (0..d).map(|i| dh[i] * (s.h_prev[i] - s.cand[i])).collect();
            let da_h: Vec<f64> = (0..d)
                .map(|i| dh[i] * (1.0 - s.u[i]) * (1.0 - s.cand[i] * s.cand[i]))
                .collect();
            grad.w_h.add_outer(&da_h, &s.z);
            grad.u_h.add_outer(&da_h, &s.rh);
            add_into(&mut grad.b_h, &da_h);
            let mut dzt = self.w_h.t_mul_vec(&da_h);
            let drh = self.u_h.t_mul_vec(&da_h);
            let dr: Vec<f64> = (0..d).map(|i| drh[i] * s.h_prev[i]).collect();
            for i in 0..d {
                dh_prev[i] += drh[i] * s.r[i];
            }

            let da_u: Vec<f64> = (0..d).map(|i| du[i] * s.u[i] * (1.0 - s.u[i])).collect();
            grad.w_u.add_outer(&da_u, &s.z);
            grad.u_u.add_outer(&da_u, &s.h_prev);
            add_into(&mut grad.b_u, &da_u);
            add_into(&mut dzt, &self.w_u.t_mul_vec(&da_u));
            add_into(&mut dh_prev, &self.u_u.t_mul_vec(&da_u));

            let da_r: Vec<f64> = (0..d).map(|i| dr[i] * s.r[i] * (1.0 - s.r[i])).collect();
            grad.w_r.add_outer(&da_r, &s.z);
            grad.u_r.add_outer(&da_r, &s.h_prev);
            add_into(&mut grad.b_r, &da_r);
            add_into(&mut dzt, &self.w_r.t_mul_vec(&da_r));
            add_into(&mut dh_prev, &self.u_r.t_mul_vec(&da_r));

            dz.row_mut(t).copy_from_slice(&dzt);
            dh = dh_prev;
        }
        // h₁ = z₁
        add_into(dz.row_mut(0), &dh);
        dz
    }

    pub fn sgd_step(&mut self, grad: &GruParams, lr: f64) {
        for (p, g) in self.slices_mut().into_iter().zip(grad.slices()) {
            for (w, d) in p.iter_mut().zip(g) {
                *w -= lr * d;
            }
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        vec![
            &self.w_r.data,
            &self.u_r.data,
            &self.b_r,
            &self.w_u.data,
            &self.u_u.data,
            &self.b_u,
            &self.w_h.data,
            &self.u_h.data,
            &self.b_h,
        ]
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.w_r.data,
            &mut self.u_r.data,
            &mut self.b_r,
            &mut self.w_u.data,
            &mut self.u_u.data,
            &mut self.b_u,
            &mut self.w_h.data,
            &mut self.u_h.data,
            &mut self.b_h,
        ]
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (a, b) in dst.iter_mut().zip(src) {
        *a += b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_step_returns_first_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let p = GruParams::new(8, 2.0, &mut rng);
            let z = Mat::uniform(1, 8, 1.0, &mut rng);
            let (h, _) = p.forward(&z).unwrap();
            assert_eq!(h, z.row(0));
        }
    }

    #[test]
    fn saturated_update_gate_keeps_first_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = GruParams::new(8, 0.1, &mut rng);
        p.b_u = vec![50.0; 8];
        let z = Mat::uniform(5, 8, 1.0, &mut rng);
        let (h, _) = p.forward(&z).unwrap();
        for (a, b) in h.iter().zip(z.row(0)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
