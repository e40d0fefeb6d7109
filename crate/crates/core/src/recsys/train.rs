//! Epoch loop and batch prediction.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{build_examples, RecExample, RecordExplanation};
use super::model::{loss_and_grad, RecModelParams};
use super::{Task, Variant};
use crate::dataset::{DatasetSplit, InteractionRecord, DEFAULT_HISTORY_LEN};
use crate::error::{Error, Result};
use crate::nn::Init;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecHyper {
    pub task: Task,
    pub variant: Variant,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub history_len: usize,
    pub init: Init,
    pub use_context: bool,
    pub linear_head: bool,
}

impl Default for RecHyper {
    fn default() -> Self {
        RecHyper {
            task: Task::Classification,
            variant: Variant::Full,
            lr: 0.01,
            batch: 128,
            epochs: 100,
            seed: 0,
            history_len: DEFAULT_HISTORY_LEN,
            init: Init {
                emb_scale: 0.05,
                dense_scale: None,
            },
            use_context: true,
            linear_head: false,
        }
    }
}

impl RecHyper {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.history_len == 0 {
            return Err(Error::validation("batch and history length must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::validation("learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub params: RecModelParams,
    /// Mean training loss over the full training set before the first step.
    pub initial_loss: f64,
    /// Mean training loss over the full training set after each epoch.
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub key: String,
    pub yhat: f64,
    pub target: f64,
    /// Input-attention weights, row-major 6×6; absent for `ncf_head`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attention: Option<Vec<f64>>,
}

fn id_universe(records: &[&InteractionRecord]) -> (Vec<String>, Vec<String>) {
    let users = records.iter().map(|r| r.user_id.clone()).collect();
    let items = records
        .iter()
        .flat_map(|r| std::iter::once(r.item_id.clone()).chain(r.history.iter().cloned()))
        .collect();
    (users, items)
}

fn mean_loss(params: &RecModelParams, examples: &[RecExample]) -> Result<f64> {
    let mut g = params.zero_grads();
    loss_and_grad(params, examples, &mut g)
}

/// Fits the model on `split.train`. Embedding tables cover every id seen in
/// either half of the split so test records can be scored.
pub fn train(
    split: &DatasetSplit,
    explanations: &BTreeMap<String, RecordExplanation>,
    hyper: &RecHyper,
) -> Result<Trained> {
    hyper.validate()?;
    let all: Vec<&InteractionRecord> = split.train.iter().chain(&split.test).collect();
    let (users, items) = id_universe(&all);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut params = RecModelParams::new(
        users,
        items,
        hyper.variant,
        hyper.task,
        hyper.linear_head,
        hyper.history_len,
        hyper.init,
        &mut rng,
    )?;
    params.use_context = hyper.use_context;
    tracing::info!(
        variant = %hyper.variant,
        params = params.param_count(),
        records = split.train.len(),
        "training recommender"
    );
    let examples = build_examples(&split.train, &params, explanations)?;
    train_examples(params, &examples, hyper, &mut rng)
}

/// SGD over prepared examples, shuffling each epoch.
pub fn train_examples(
    mut params: RecModelParams,
    examples: &[RecExample],
    hyper: &RecHyper,
    rng: &mut ChaCha8Rng,
) -> Result<Trained> {
    if examples.is_empty() {
        return Err(Error::validation("no training records"));
    }
    let initial_loss = mean_loss(&params, examples)?;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut loss_trace = Vec::with_capacity(hyper.epochs);
    let mut batch = Vec::with_capacity(hyper.batch);
    for epoch in 0..hyper.epochs {
        order.shuffle(rng);
        for (b, chunk) in order.chunks(hyper.batch).enumerate() {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| examples[i].clone()));
            let mut grads = params.zero_grads();
            let loss = loss_and_grad(&params, &batch, &mut grads)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b, loss });
            }
            params.sgd_step(&grads, hyper.lr);
        }
        let l = mean_loss(&params, examples)?;
        if !l.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: order.len().div_ceil(hyper.batch),
                loss: l,
            });
        }
        tracing::debug!(epoch, loss = l, "recommender epoch");
        loss_trace.push(l);
    }
    Ok(Trained {
        params,
        initial_loss,
        loss_trace,
    })
}

/// Scores records in parallel; the output order matches the input.
pub fn predict_batch(
    records: &[InteractionRecord],
    explanations: &BTreeMap<String, RecordExplanation>,
    params: &RecModelParams,
) -> Result<Vec<Prediction>> {
    let examples = build_examples(records, params, explanations)?;
    examples
        .par_iter()
        .map(|ex| {
            let c = params.forward(ex)?;
            Ok(Prediction {
                key: ex.key.clone(),
                yhat: c.yhat,
                target: ex.target,
                attention: c.input_attention().map(|a| a.data.clone()),
            })
        })
        .collect()
}
