//! Parameters, forward pass and backpropagation of the recommender.
//!
//! For one record the six slot vectors `[pos, neg, consumer, product,
//! sequence, context]` form a 6×8 matrix `X`. The sequence slot is the last
//! GRU state over the self-attended history embeddings; the context slot is a
//! linear projection of the time features. `X` passes through input
//! self-attention, is flattened to 48 values and scored by a ReLU MLP
//! `[64, 8, 1]` with a sigmoid output. The `ncf_head` variant skips the input
//! attention and uses a `[32, 16, 8, 1]` MLP instead.
//!
//! Numeric error layer indices: 0 embeddings, 1 sequence attention, 2 GRU,
//! 3 context projection, 4 input attention, `5 + k` head layer `k`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::{RecExample, CONTEXT_DIM};
use super::{Task, Variant};
use crate::dataset::SENTINEL_ITEM;
use crate::error::{Error, Result};
use crate::nn::{sigmoid, AttentionCache, AttentionParams, Dense, GruCache, GruParams, Init, Mat};

pub const EMBED_DIM: usize = 8;
pub const SLOTS: usize = 6;
/// Predictions are clamped to `[ε, 1 − ε]` inside the cross-entropy.
pub const BCE_EPS: f64 = 1e-7;

const HEAD_HIDDEN: [usize; 2] = [64, 8];
const NCF_HIDDEN: [usize; 3] = [32, 16, 8];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecModelParams {
    pub variant: Variant,
    pub task: Task,
    /// Regression only: drop the output sigmoid and fit raw ratings.
    pub linear_head: bool,
    pub history_len: usize,
    /// When off the context slot sees an all-zero feature vector.
    pub use_context: bool,
    pub users: BTreeMap<String, usize>,
    /// Product id → table row; row 0 belongs to the sentinel.
    pub items: BTreeMap<String, usize>,
    pub e_c: Mat,
    pub e_p: Mat,
    pub seq_attn: AttentionParams,
    pub gru: GruParams,
    pub in_attn: AttentionParams,
    pub ctx: Dense,
    pub head: Vec<Dense>,
    /// Two shared trainable slot vectors used by `free_params_substitute`.
    pub free: Mat,
}

/// Gradients with sparse embedding rows.
#[derive(Debug, Clone)]
pub struct RecGrads {
    pub e_c: BTreeMap<usize, Vec<f64>>,
    pub e_p: BTreeMap<usize, Vec<f64>>,
    pub seq_attn: AttentionParams,
    pub gru: GruParams,
    pub in_attn: AttentionParams,
    pub ctx: Dense,
    pub head: Vec<Dense>,
    pub free: Mat,
}

#[derive(Debug, Clone)]
pub struct RecCache {
    seq_in: Mat,
    seq_attn: AttentionCache,
    gru: GruCache,
    x: Mat,
    in_attn: Option<AttentionCache>,
    /// Input of every head layer, post-activation.
    head_in: Vec<Vec<f64>>,
    pub output: f64,
    pub yhat: f64,
}

impl RecCache {
    /// Input-attention weights (6×6), absent for `ncf_head`.
    pub fn input_attention(&self) -> Option<&Mat> {
        self.in_attn.as_ref().map(|c| &c.alpha)
    }

    pub fn sequence_attention(&self) -> &Mat {
        &self.seq_attn.alpha
    }

    pub fn slots(&self) -> &Mat {
        &self.x
    }
}

fn add_row(map: &mut BTreeMap<usize, Vec<f64>>, row: usize, g: &[f64]) {
    let e = map.entry(row).or_insert_with(|| vec![0.0; g.len()]);
    for (a, b) in e.iter_mut().zip(g) {
        *a += b;
    }
}

fn finite(v: &[f64], layer: usize, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::numeric(format!("recommender {what}"), layer))
    }
}

impl RecModelParams {
    /// Builds tables for the given ids; biases start at zero.
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        users: impl IntoIterator<Item = String>,
        items: impl IntoIterator<Item = String>,
        variant: Variant,
        task: Task,
        linear_head: bool,
        history_len: usize,
        init: Init,
        rng: &mut R,
    ) -> Result<Self> {
        if history_len == 0 {
            return Err(Error::validation("history length must be at least 1"));
        }
        let mut u: Vec<String> = users.into_iter().collect();
        u.sort();
        u.dedup();
        let mut it: Vec<String> = items.into_iter().filter(|i| i != SENTINEL_ITEM).collect();
        it.sort();
        it.dedup();
        if u.is_empty() || it.is_empty() {
            return Err(Error::validation("need at least one consumer and one product"));
        }
        let users: BTreeMap<String, usize> = u.into_iter().enumerate().map(|(i, s)| (s, i)).collect();
        let items: BTreeMap<String, usize> = it.into_iter().enumerate().map(|(i, s)| (s, i + 1)).collect();
        let d = EMBED_DIM;
        let e_c = init.embedding(users.len(), d, rng);
        let e_p = init.embedding(items.len() + 1, d, rng);
        let attention = |rng: &mut R| AttentionParams {
            wq: init.square(d, rng),
            wk: init.square(d, rng),
            wv: init.square(d, rng),
        };
        let seq_attn = attention(rng);
        let mut gru = GruParams::zeros(d);
        for m in [
            &mut gru.w_r,
            &mut gru.u_r,
            &mut gru.w_u,
            &mut gru.u_u,
            &mut gru.w_h,
            &mut gru.u_h,
        ] {
            *m = init.square(d, rng);
        }
        let in_attn = attention(rng);
        let ctx = init.dense(CONTEXT_DIM, d, rng);
        let hidden: &[usize] = if variant == Variant::NcfHead {
            &NCF_HIDDEN
        } else {
            &HEAD_HIDDEN
        };
        let mut head = Vec::new();
        let mut prev = SLOTS * d;
        for &h in hidden.iter().chain(&[1]) {
            head.push(init.dense(prev, h, rng));
            prev = h;
        }
        let free = init.embedding(2, d, rng);
        Ok(RecModelParams {
            variant,
            task,
            linear_head: linear_head && task == Task::Regression,
            history_len,
            use_context: true,
            users,
            items,
            e_c,
            e_p,
            seq_attn,
            gru,
            in_attn,
            ctx,
            head,
            free,
        })
    }

    pub fn user_row(&self, id: &str) -> Result<usize> {
        self.users.get(id).copied().ok_or_else(|| Error::UnknownId {
            table: "consumer embeddings",
            id: id.to_string(),
        })
    }

    pub fn item_row(&self, id: &str) -> Result<usize> {
        if id == SENTINEL_ITEM {
            return Ok(0);
        }
        self.items.get(id).copied().ok_or_else(|| Error::UnknownId {
            table: "product embeddings",
            id: id.to_string(),
        })
    }

    fn sigmoid_output(&self) -> bool {
        !self.linear_head
    }

    pub fn zero_grads(&self) -> RecGrads {
        RecGrads {
            e_c: BTreeMap::new(),
            e_p: BTreeMap::new(),
            seq_attn: self.seq_attn.zeros_like(),
            gru: self.gru.zeros_like(),
            in_attn: self.in_attn.zeros_like(),
            ctx: self.ctx.zeros_like(),
            head: self.head.iter().map(Dense::zeros_like).collect(),
            free: self.free.zeros_like(),
        }
    }

    /// Named flat views of every trainable tensor.
    pub fn groups(&self) -> Vec<(String, &[f64])> {
        let mut g: Vec<(String, &[f64])> = vec![
            ("e_c".into(), &self.e_c.data),
            ("e_p".into(), &self.e_p.data),
            ("seq_attn.wq".into(), &self.seq_attn.wq.data),
            ("seq_attn.wk".into(), &self.seq_attn.wk.data),
            ("seq_attn.wv".into(), &self.seq_attn.wv.data),
        ];
        for (i, s) in self.gru.slices().into_iter().enumerate() {
            g.push((format!("gru.{i}"), s));
        }
        g.push(("in_attn.wq".into(), &self.in_attn.wq.data));
        g.push(("in_attn.wk".into(), &self.in_attn.wk.data));
        g.push(("in_attn.wv".into(), &self.in_attn.wv.data));
        g.push(("ctx.w".into(), &self.ctx.w.data));
        g.push(("ctx.b".into(), &self.ctx.b));
        for (i, d) in self.head.iter().enumerate() {
            g.push((format!("head.{i}.w"), &d.w.data));
            g.push((format!("head.{i}.b"), &d.b));
        }
        g.push(("free".into(), &self.free.data));
        g
    }

    pub fn groups_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut g: Vec<(String, &mut [f64])> = vec![
            ("e_c".into(), &mut self.e_c.data),
            ("e_p".into(), &mut self.e_p.data),
            ("seq_attn.wq".into(), &mut self.seq_attn.wq.data),
            ("seq_attn.wk".into(), &mut self.seq_attn.wk.data),
            ("seq_attn.wv".into(), &mut self.seq_attn.wv.data),
        ];
        for (i, s) in self.gru.slices_mut().into_iter().enumerate() {
            g.push((format!("gru.{i}"), s));
        }
        g.push(("in_attn.wq".into(), &mut self.in_attn.wq.data));
        g.push(("in_attn.wk".into(), &mut self.in_attn.wk.data));
        g.push(("in_attn.wv".into(), &mut self.in_attn.wv.data));
        g.push(("ctx.w".into(), &mut self.ctx.w.data));
        g.push(("ctx.b".into(), &mut self.ctx.b));
        for (i, d) in self.head.iter_mut().enumerate() {
            g.push((format!("head.{i}.w"), &mut d.w.data));
            g.push((format!("head.{i}.b"), &mut d.b));
        }
        g.push(("free".into(), &mut self.free.data));
        g
    }

    pub fn param_count(&self) -> usize {
        self.groups().iter().map(|(_, g)| g.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.groups().iter().all(|(_, g)| g.iter().all(|x| x.is_finite()))
    }

    pub fn forward(&self, ex: &RecExample) -> Result<RecCache> {
        let d = EMBED_DIM;
        let rows: Vec<Vec<f64>> = ex.history.iter().map(|&h| self.e_p.row(h).to_vec()).collect();
        let seq_in = Mat::from_rows(&rows);
        finite(&seq_in.data, 0, "history embeddings")?;
        let (z, seq_attn) = self
            .seq_attn
            .forward(&seq_in)
            .map_err(|_| Error::numeric("recommender sequence attention", 1))?;
        let (h_n, gru) = self
            .gru
            .forward(&z)
            .map_err(|_| Error::numeric("recommender GRU", 2))?;
        let ctx = self.ctx.forward(&ex.context);
        finite(&ctx, 3, "context projection")?;

        let (pos, neg) = if self.variant == Variant::FreeParamsSubstitute {
            (self.free.row(0).to_vec(), self.free.row(1).to_vec())
        } else {
            (ex.pos.clone(), ex.neg.clone())
        };
        let x = Mat::from_rows(&[
            pos,
            neg,
            self.e_c.row(ex.user).to_vec(),
            self.e_p.row(ex.item).to_vec(),
            h_n,
            ctx,
        ]);
        finite(&x.data, 0, "input slots")?;

        let (flat, in_attn) = if self.variant == Variant::NcfHead {
            (x.data.clone(), None)
        } else {
            let (zi, c) = self
                .in_attn
                .forward(&x)
                .map_err(|_| Error::numeric("recommender input attention", 4))?;
            (zi.data, Some(c))
        };
        debug_assert_eq!(flat.len(), SLOTS * d);

        let mut head_in = Vec::with_capacity(self.head.len());
        let mut a = flat;
        let last = self.head.len() - 1;
        for (i, layer) in self.head.iter().enumerate() {
            let mut out = layer.forward(&a);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            finite(&out, 5 + i, "head layer")?;
            head_in.push(std::mem::replace(&mut a, out));
        }
        let output = a[0];
        let yhat = if self.sigmoid_output() { sigmoid(output) } else { output };
        Ok(RecCache {
            seq_in,
            seq_attn,
            gru,
            x,
            in_attn,
            head_in,
            output,
            yhat,
        })
    }

    /// Backpropagates `∂L/∂output` (pre-sigmoid logit) into `grads`.
    pub fn backward(&self, ex: &RecExample, cache: &RecCache, d_output: f64, grads: &mut RecGrads) {
        let d = EMBED_DIM;
        let mut g = vec![d_output];
        for i in (0..self.head.len()).rev() {
            if i < self.head.len() - 1 {
                // ReLU: the next layer's input is this layer's activated output
                let act = &cache.head_in[i + 1];
                for (gv, &a) in g.iter_mut().zip(act) {
                    if a <= 0.0 {
                        *gv = 0.0;
                    }
                }
            }
            g = self.head[i].backward(&cache.head_in[i], &g, &mut grads.head[i]);
        }
        let dflat = Mat::from_vec(SLOTS, d, g);
        let dx = match &cache.in_attn {
            Some(c) => self.in_attn.backward(c, &dflat, &mut grads.in_attn),
            None => dflat,
        };
        if self.variant == Variant::FreeParamsSubstitute {
            for r in 0..2 {
                crate::nn::axpy(1.0, dx.row(r), grads.free.row_mut(r));
            }
        }
        add_row(&mut grads.e_c, ex.user, dx.row(2));
        add_row(&mut grads.e_p, ex.item, dx.row(3));
        let dz = self.gru.backward(&cache.gru, dx.row(4), &mut grads.gru);
        let ds = self.seq_attn.backward(&cache.seq_attn, &dz, &mut grads.seq_attn);
        for (t, &h) in ex.history.iter().enumerate() {
            add_row(&mut grads.e_p, h, ds.row(t));
        }
        debug_assert_eq!(cache.seq_in.rows, ex.history.len());
        self.ctx.backward(&ex.context, dx.row(5), &mut grads.ctx);
    }

    /// `θ ← θ − η·g`; only embedding rows present in `grads` move.
    pub fn sgd_step(&mut self, grads: &RecGrads, lr: f64) {
        for (&r, g) in &grads.e_c {
            crate::nn::axpy(-lr, g, self.e_c.row_mut(r));
        }
        for (&r, g) in &grads.e_p {
            crate::nn::axpy(-lr, g, self.e_p.row_mut(r));
        }
        self.seq_attn.sgd_step(&grads.seq_attn, lr);
        self.gru.sgd_step(&grads.gru, lr);
        self.in_attn.sgd_step(&grads.in_attn, lr);
        self.ctx.sgd_step(&grads.ctx, lr);
        for (p, g) in self.head.iter_mut().zip(&grads.head) {
            p.sgd_step(g, lr);
        }
        for (w, g) in self.free.data.iter_mut().zip(&grads.free.data) {
            *w -= lr * g;
        }
    }

    /// Per-example loss and `∂loss/∂output`.
    pub fn example_loss(&self, target: f64, cache: &RecCache) -> (f64, f64) {
        let y = target;
        let p = cache.yhat;
        match self.task {
            Task::Classification => {
                let pc = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
                let loss = -(y * pc.ln() + (1.0 - y) * (1.0 - pc).ln());
                let grad = if p < BCE_EPS || p > 1.0 - BCE_EPS { 0.0 } else { p - y };
                (loss, grad)
            }
            Task::Regression => {
                let e = p - y;
                let dp = if self.sigmoid_output() { p * (1.0 - p) } else { 1.0 };
                (e * e, 2.0 * e * dp)
            }
        }
    }
}

impl RecGrads {
    /// Dense copy laid out like the parameters, for inspection and tests.
    pub fn densify(&self, params: &RecModelParams) -> RecModelParams {
        let mut out = params.clone();
        for (_, g) in out.groups_mut() {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
        for (&r, g) in &self.e_c {
            out.e_c.row_mut(r).copy_from_slice(g);
        }
        for (&r, g) in &self.e_p {
            out.e_p.row_mut(r).copy_from_slice(g);
        }
        out.seq_attn = self.seq_attn.clone();
        out.gru = self.gru.clone();
        out.in_attn = self.in_attn.clone();
        out.ctx = self.ctx.clone();
        out.head = self.head.clone();
        out.free = self.free.clone();
        out
    }
}

/// Mean loss over `batch`; gradients of that mean are added to `grads`.
pub fn loss_and_grad(params: &RecModelParams, batch: &[RecExample], grads: &mut RecGrads) -> Result<f64> {
    let w = 1.0 / batch.len().max(1) as f64;
    let mut total = 0.0;
    for ex in batch {
        let c = params.forward(ex)?;
        let (l, g) = params.example_loss(ex.target, &c);
        total += l;
        params.backward(ex, &c, g * w, grads);
    }
    Ok(total * w)
}
