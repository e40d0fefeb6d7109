//! MLP text AutoEncoder.
//!
//! Words are embedded with a `|V| × d` table and flattened into a `d·maxlen`
//! vector. The encoder maps it through a 64-unit hidden layer (ReLU by
//! default) to a linear 8-unit bottleneck; the decoder mirrors it (64 hidden
//! units, then a linear
//! layer back to `d·maxlen`). Each reconstructed position `d_l` is scored
//! against every word by the tied embedding table plus a shared output bias:
//! `logits_l = E·d_l + c`.
//!
//! The `<pad>` row of `E` is held at zero and never updated, so padding adds
//! nothing to the encoder input and its logit is the bias `c_pad` alone.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{Vocab, PAD_ID};
use crate::error::{Error, Result};
use crate::nn::{log_sum_exp, Dense, Init, Mat};

pub const HIDDEN: usize = 64;
pub const BOTTLENECK: usize = 8;

/// Nonlinearity of the two 64-unit hidden layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    #[default]
    Relu,
}

impl Activation {
    fn apply(self, v: Vec<f64>) -> Vec<f64> {
        match self {
            Activation::Tanh => v.into_iter().map(f64::tanh).collect(),
            Activation::Relu => v.into_iter().map(|x| x.max(0.0)).collect(),
        }
    }

    /// Gradient through the activation given its output `h`.
    fn back(self, dh: &[f64], h: &[f64]) -> Vec<f64> {
        match self {
            Activation::Tanh => dh.iter().zip(h).map(|(g, h)| g * (1.0 - h * h)).collect(),
            Activation::Relu => dh.iter().zip(h).map(|(g, h)| if *h > 0.0 { *g } else { 0.0 }).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoEncoderParams {
    pub vocab: Vocab,
    pub maxlen: usize,
    pub dim: usize,
    pub activation: Activation,
    /// Word embeddings, `|V| × dim`; also the output projection.
    pub emb: Mat,
    pub enc_hidden: Dense,
    pub enc_out: Dense,
    pub dec_hidden: Dense,
    pub dec_out: Dense,
    /// Per-word output bias shared by all positions.
    pub out_bias: Vec<f64>,
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone)]
pub struct AeCache {
    pub tokens: Vec<usize>,
    pub x: Vec<f64>,
    pub h1: Vec<f64>,
    pub bottleneck: Vec<f64>,
    pub h3: Vec<f64>,
    pub recon: Vec<f64>,
    /// `maxlen × |V|`.
    pub logits: Mat,
}

fn check(v: &[f64], layer: usize, name: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::numeric(format!("autoencoder {name}"), layer))
    }
}

impl AutoEncoderParams {
    pub fn new<R: Rng + ?Sized>(
        vocab: Vocab,
        maxlen: usize,
        dim: usize,
        activation: Activation,
        init: Init,
        rng: &mut R,
    ) -> Self {
        let v = vocab.len();
        let mut emb = Mat::uniform(v, dim, init.emb_scale, rng);
        emb.row_mut(PAD_ID).fill(0.0);
        let enc_hidden = init.dense(dim * maxlen, HIDDEN, rng);
        let enc_out = init.dense(HIDDEN, BOTTLENECK, rng);
        let dec_hidden = init.dense(BOTTLENECK, HIDDEN, rng);
        let dec_out = init.dense(HIDDEN, dim * maxlen, rng);
        AutoEncoderParams {
            vocab,
            maxlen,
            dim,
            activation,
            emb,
            enc_hidden,
            enc_out,
            dec_hidden,
            dec_out,
            out_bias: vec![0.0; v],
        }
    }

    pub fn zeros_like(&self) -> Self {
        AutoEncoderParams {
            vocab: self.vocab.clone(),
            maxlen: self.maxlen,
            dim: self.dim,
            activation: self.activation,
            emb: self.emb.zeros_like(),
            enc_hidden: self.enc_hidden.zeros_like(),
            enc_out: self.enc_out.zeros_like(),
            dec_hidden: self.dec_hidden.zeros_like(),
            dec_out: self.dec_out.zeros_like(),
            out_bias: vec![0.0; self.out_bias.len()],
        }
    }

    /// Weights of the four dense layers, biases excluded. At `dim = 8`,
    /// `maxlen = 50` this is 52,224.
    pub fn layer_weight_count(&self) -> usize {
        [&self.enc_hidden, &self.enc_out, &self.dec_hidden, &self.dec_out]
            .iter()
            .map(|d| d.w.data.len())
            .sum()
    }

    pub fn param_count(&self) -> usize {
        self.groups().iter().map(|(_, g)| g.len()).sum()
    }

    /// Named parameter tensors, flattened.
    pub fn groups(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("emb", &self.emb.data),
            ("enc_hidden.w", &self.enc_hidden.w.data),
            ("enc_hidden.b", &self.enc_hidden.b),
            ("enc_out.w", &self.enc_out.w.data),
            ("enc_out.b", &self.enc_out.b),
            ("dec_hidden.w", &self.dec_hidden.w.data),
            ("dec_hidden.b", &self.dec_hidden.b),
            ("dec_out.w", &self.dec_out.w.data),
            ("dec_out.b", &self.dec_out.b),
            ("out_bias", &self.out_bias),
        ]
    }

    pub fn groups_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("emb", &mut self.emb.data),
            ("enc_hidden.w", &mut self.enc_hidden.w.data),
            ("enc_hidden.b", &mut self.enc_hidden.b),
            ("enc_out.w", &mut self.enc_out.w.data),
            ("enc_out.b", &mut self.enc_out.b),
            ("dec_hidden.w", &mut self.dec_hidden.w.data),
            ("dec_hidden.b", &mut self.dec_hidden.b),
            ("dec_out.w", &mut self.dec_out.w.data),
            ("dec_out.b", &mut self.dec_out.b),
            ("out_bias", &mut self.out_bias),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.groups().iter().all(|(_, g)| g.iter().all(|x| x.is_finite()))
    }

    fn embed_tokens(&self, tokens: &[usize]) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(self.dim * self.maxlen);
        for &t in tokens {
            if t >= self.emb.rows {
                return Err(Error::UnknownId {
                    table: "autoencoder vocabulary",
                    id: t.to_string(),
                });
            }
            x.extend_from_slice(self.emb.row(t));
        }
        Ok(x)
    }

    /// Bottleneck only.
    pub fn encode(&self, tokens: &[usize]) -> Result<Vec<f64>> {
        self.check_len(tokens)?;
        let x = self.embed_tokens(tokens)?;
        check(&x, 0, "embedding")?;
        let h1 = self.activation.apply(self.enc_hidden.forward(&x));
        check(&h1, 1, "encoder hidden layer")?;
        let b = self.enc_out.forward(&h1);
        check(&b, 2, "bottleneck")?;
        Ok(b)
    }

    fn check_len(&self, tokens: &[usize]) -> Result<()> {
        if tokens.len() != self.maxlen {
            return Err(Error::validation(format!(
                "token sequence has length {}, expected {}",
                tokens.len(),
                self.maxlen
            )));
        }
        Ok(())
    }

    pub fn forward(&self, tokens: &[usize]) -> Result<AeCache> {
        self.check_len(tokens)?;
        let x = self.embed_tokens(tokens)?;
        check(&x, 0, "embedding")?;
        let h1 = self.activation.apply(self.enc_hidden.forward(&x));
        check(&h1, 1, "encoder hidden layer")?;
        let bottleneck = self.enc_out.forward(&h1);
        check(&bottleneck, 2, "bottleneck")?;
        let h3 = self.activation.apply(self.dec_hidden.forward(&bottleneck));
        check(&h3, 3, "decoder hidden layer")?;
        let recon = self.dec_out.forward(&h3);
        check(&recon, 4, "decoder output")?;
        let v = self.emb.rows;
        let mut logits = Mat::zeros(self.maxlen, v);
        for l in 0..self.maxlen {
            let d_l = &recon[l * self.dim..(l + 1) * self.dim];
            let row = logits.row_mut(l);
            for (w, out) in row.iter_mut().enumerate() {
                *out = crate::nn::dot(self.emb.row(w), d_l) + self.out_bias[w];
            }
        }
        check(&logits.data, 5, "logits")?;
        Ok(AeCache {
            tokens: tokens.to_vec(),
            x,
            h1,
            bottleneck,
            h3,
            recon,
            logits,
        })
    }

    /// Backpropagates `dlogits` (`maxlen × |V|`) into `grad`.
    pub fn backward(&self, cache: &AeCache, dlogits: &Mat, grad: &mut AutoEncoderParams) {
        let dim = self.dim;
        let mut drecon = vec![0.0; self.maxlen * dim];
        for l in 0..self.maxlen {
            let dl = dlogits.row(l);
            let d_l = &cache.recon[l * dim..(l + 1) * dim];
            let dd = &mut drecon[l * dim..(l + 1) * dim];
            for (w, &g) in dl.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grad.out_bias[w] += g;
                if w == PAD_ID {
                    continue;
                }
                let e = self.emb.row(w);
                let ge = grad.emb.row_mut(w);
                for k in 0..dim {
                    ge[k] += g * d_l[k];
                    dd[k] += g * e[k];
                }
            }
        }
        let dh3 = self.dec_out.backward(&cache.h3, &drecon, &mut grad.dec_out);
        let da3 = self.activation.back(&dh3, &cache.h3);
        let db = self.dec_hidden.backward(&cache.bottleneck, &da3, &mut grad.dec_hidden);
        let dh1 = self.enc_out.backward(&cache.h1, &db, &mut grad.enc_out);
        let da1 = self.activation.back(&dh1, &cache.h1);
        let dx = self.enc_hidden.backward(&cache.x, &da1, &mut grad.enc_hidden);
        for (l, &t) in cache.tokens.iter().enumerate() {
            if t == PAD_ID {
                continue;
            }
            let ge = grad.emb.row_mut(t);
            for k in 0..dim {
                ge[k] += dx[l * dim + k];
            }
        }
    }

    pub fn sgd_step(&mut self, grad: &AutoEncoderParams, lr: f64) {
        for ((_, p), (_, g)) in self.groups_mut().into_iter().zip(grad.groups()) {
            for (w, d) in p.iter_mut().zip(g) {
                *w -= lr * d;
            }
        }
    }

    /// Argmax reconstruction per position.
    pub fn reconstruct(&self, tokens: &[usize]) -> Result<Vec<usize>> {
        let c = self.forward(tokens)?;
        Ok((0..self.maxlen)
            .map(|l| {
                let row = c.logits.row(l);
                (0..row.len())
                    .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                    .unwrap_or(PAD_ID)
            })
            .collect())
    }
}

/// Per-position cross-entropy `−log softmax(logits_l)[t_l]` and its gradient
/// w.r.t. the logits, scaled by `weight`. Positions with `mask[l] = false`
/// contribute nothing.
pub fn ce_with_grad(logits: &Mat, tokens: &[usize], mask: Option<&[bool]>, weight: f64) -> (f64, Mat) {
    let mut grad = Mat::zeros(logits.rows, logits.cols);
    let mut total = 0.0;
    for (l, &t) in tokens.iter().enumerate() {
        if mask.is_some_and(|m| !m[l]) {
            continue;
        }
        let row = logits.row(l);
        let lse = log_sum_exp(row);
        total += lse - row[t];
        let g = grad.row_mut(l);
        for (w, out) in g.iter_mut().enumerate() {
            *out = weight * (row[w] - lse).exp();
        }
        g[t] -= weight;
    }
    (total * weight, grad)
}

/// Mean over positions of the per-position cross-entropy; pad positions
/// count unless `mask_pads` is set.
pub fn ae_loss(logits: &Mat, tokens: &[usize], mask_pads: bool) -> f64 {
    let mask: Option<Vec<bool>> = mask_pads.then(|| tokens.iter().map(|&t| t != PAD_ID).collect());
    let n = match &mask {
        Some(m) => m.iter().filter(|&&b| b).count(),
        None => tokens.len(),
    };
    if n == 0 {
        return 0.0;
    }
    ce_with_grad(logits, tokens, mask.as_deref(), 1.0).0 / n as f64
}
