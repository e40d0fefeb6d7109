//! Mini-batch SGD for the AutoEncoder and bottleneck embedding of texts.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{ae_loss, ce_with_grad, Activation, AutoEncoderParams};
use super::vocab::{tokenize_pad, Vocab, PAD_ID};
use crate::error::{Error, Result};
use crate::nn::Init;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AeOptimizer {
    Sgd,
    /// Adam with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    #[default]
    Adam,
}

/// Per-parameter first and second moment estimates.
struct AdamState {
    m: AutoEncoderParams,
    v: AutoEncoderParams,
    t: i32,
}

impl AdamState {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(p: &AutoEncoderParams) -> Self {
        AdamState { m: p.zeros_like(), v: p.zeros_like(), t: 0 }
    }

    fn step(&mut self, params: &mut AutoEncoderParams, grad: &AutoEncoderParams, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let groups = params
            .groups_mut()
            .into_iter()
            .zip(grad.groups())
            .zip(self.m.groups_mut().into_iter().zip(self.v.groups_mut()));
        for (((_, p), (_, g)), ((_, m), (_, v))) in groups {
            for i in 0..p.len() {
                m[i] = Self::B1 * m[i] + (1.0 - Self::B1) * g[i];
                v[i] = Self::B2 * v[i] + (1.0 - Self::B2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

/// How per-position losses combine into one batch objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// Sum over every position of every sentence in the batch.
    #[default]
    Sum,
    /// Mean over the same terms.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AeHyper {
    pub maxlen: usize,
    pub dim: usize,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub init: Init,
    pub activation: Activation,
    pub reduction: Reduction,
    pub optimizer: AeOptimizer,
    /// Leave pad positions out of the loss.
    pub mask_pads: bool,
    /// Start the output bias at the log unigram frequencies of the training
    /// tokens instead of zero.
    pub prior_bias: bool,
}

impl Default for AeHyper {
    fn default() -> Self {
        AeHyper {
            maxlen: 50,
            dim: 8,
            lr: 0.01,
            batch: 128,
            epochs: 100,
            seed: 0,
            init: Init::default(),
            activation: Activation::Relu,
            reduction: Reduction::Sum,
            optimizer: AeOptimizer::Adam,
            mask_pads: false,
            prior_bias: true,
        }
    }
}

impl AeHyper {
    pub fn validate(&self) -> Result<()> {
        if self.maxlen == 0 || self.dim == 0 || self.batch == 0 {
            return Err(Error::validation("maxlen, dim and batch must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::validation("learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AeTrained {
    pub params: AutoEncoderParams,
    /// Mean per-position loss over the corpus after each epoch.
    pub loss_trace: Vec<f64>,
}

pub fn encode_corpus<S: AsRef<str>>(corpus: &[S], vocab: &Vocab, maxlen: usize) -> Vec<Vec<usize>> {
    corpus.iter().map(|t| tokenize_pad(t.as_ref(), vocab, maxlen).0).collect()
}

/// Mean per-position loss over a tokenized corpus.
pub fn corpus_loss(params: &AutoEncoderParams, seqs: &[Vec<usize>], mask_pads: bool) -> Result<f64> {
    let mut total = 0.0;
    for (s, n) in distinct(seqs.iter()) {
        total += n as f64 * ae_loss(&params.forward(s)?.logits, s, mask_pads);
    }
    Ok(total / seqs.len().max(1) as f64)
}

/// Distinct sequences with their multiplicities, in first-occurrence order.
/// Identical sentences yield identical gradients, so each is evaluated once
/// and weighted by its count.
fn distinct<'a>(seqs: impl Iterator<Item = &'a Vec<usize>>) -> Vec<(&'a Vec<usize>, usize)> {
    let mut pos: HashMap<&Vec<usize>, usize> = HashMap::new();
    let mut out: Vec<(&Vec<usize>, usize)> = Vec::new();
    for s in seqs {
        match pos.get(s) {
            Some(&i) => out[i].1 += 1,
            None => {
                pos.insert(s, out.len());
                out.push((s, 1));
            }
        }
    }
    out
}

/// Token-reconstruction accuracy as `(non-pad, all positions)`.
pub fn reconstruction_accuracy(params: &AutoEncoderParams, seqs: &[Vec<usize>]) -> Result<(f64, f64)> {
    let (mut hit, mut n, mut hit_all, mut n_all) = (0usize, 0usize, 0usize, 0usize);
    for (s, k) in distinct(seqs.iter()) {
        let r = params.reconstruct(s)?;
        for (&t, &p) in s.iter().zip(&r) {
            n_all += k;
            hit_all += k * (t == p) as usize;
            if t != PAD_ID {
                n += k;
                hit += k * (t == p) as usize;
            }
        }
    }
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok((frac(hit, n), frac(hit_all, n_all)))
}

/// Log relative frequency of each id, with add-one smoothing.
pub fn log_unigram(seqs: &[Vec<usize>], vocab_len: usize, skip_pad: bool) -> Vec<f64> {
    let mut counts = vec![1.0; vocab_len];
    for &t in seqs.iter().flatten() {
        if !(skip_pad && t == PAD_ID) {
            counts[t] += 1.0;
        }
    }
    let total: f64 = counts.iter().sum();
    counts.iter().map(|c| (c / total).ln()).collect()
}

/// Trains from scratch on the given corpus, building the vocabulary from it.
pub fn train_autoencoder<S: AsRef<str>>(corpus: &[S], hyper: &AeHyper) -> Result<AeTrained> {
    hyper.validate()?;
    let vocab = Vocab::build(corpus)?;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut params = AutoEncoderParams::new(
        vocab,
        hyper.maxlen,
        hyper.dim,
        hyper.activation,
        hyper.init,
        &mut rng,
    );
    tracing::info!(
        vocab = params.vocab.len(),
        layer_weights = params.layer_weight_count(),
        total_params = params.param_count(),
        "autoencoder initialised"
    );
    let seqs = encode_corpus(corpus, &params.vocab, hyper.maxlen);
    if hyper.prior_bias {
        params.out_bias = log_unigram(&seqs, params.vocab.len(), hyper.mask_pads);
    }
    train_params(params, &seqs, hyper, &mut rng)
}

/// Runs SGD on already-initialised parameters.
pub fn train_params(
    mut params: AutoEncoderParams,
    seqs: &[Vec<usize>],
    hyper: &AeHyper,
    rng: &mut ChaCha8Rng,
) -> Result<AeTrained> {
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    let mut loss_trace = Vec::with_capacity(hyper.epochs);
    let mut grad = params.zeros_like();
    let mut adam = (hyper.optimizer == AeOptimizer::Adam).then(|| AdamState::new(&params));
    for epoch in 0..hyper.epochs {
        order.shuffle(rng);
        for (b, chunk) in order.chunks(hyper.batch).enumerate() {
            grad = grad.zeros_like();
            let terms: usize = chunk
                .iter()
                .map(|&i| {
                    if hyper.mask_pads {
                        seqs[i].iter().filter(|&&t| t != PAD_ID).count()
                    } else {
                        seqs[i].len()
                    }
                })
                .sum();
            let weight = match hyper.reduction {
                Reduction::Sum => 1.0,
                Reduction::Mean => 1.0 / terms.max(1) as f64,
            };
            let mut batch_loss = 0.0;
            for (s, n) in distinct(chunk.iter().map(|&i| &seqs[i])) {
                let cache = params.forward(s)?;
                let mask: Option<Vec<bool>> = hyper.mask_pads.then(|| s.iter().map(|&t| t != PAD_ID).collect());
                let (l, dl) = ce_with_grad(&cache.logits, s, mask.as_deref(), weight * n as f64);
                batch_loss += l;
                params.backward(&cache, &dl, &mut grad);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss: batch_loss,
                });
            }
            match adam.as_mut() {
                Some(a) => a.step(&mut params, &grad, hyper.lr),
                None => params.sgd_step(&grad, hyper.lr),
            }
            if !params.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss: f64::NAN,
                });
            }
        }
        let l = corpus_loss(&params, seqs, hyper.mask_pads)?;
        tracing::debug!(epoch, loss = l, "autoencoder epoch");
        loss_trace.push(l);
    }
    Ok(AeTrained { params, loss_trace })
}

/// Bottleneck vector of one text.
pub fn embed_explanation(text: &str, vocab: &Vocab, params: &AutoEncoderParams) -> Result<Vec<f64>> {
    let (ids, _) = tokenize_pad(text, vocab, params.maxlen);
    params.encode(&ids)
}
