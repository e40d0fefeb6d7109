use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lrrec_bench::{autoencoder, random_mat, recommender, sparse_design};
use lrrec_core::autoencoder::ce_with_grad;
use lrrec_core::eval::auc;
use lrrec_core::nn::{AttentionParams, GruParams};
use lrrec_core::recsys::loss_and_grad;
use lrrec_core::theory::{eills_fit_smallp, gen_multi_env, lasso_fit, EnvConfig};

fn nn_kernels(c: &mut Criterion) {
    let s = random_mat(6, 8, 3);
    let attn = AttentionParams::new(8, 0.5, &mut lrrec_bench::rng(4));
    c.bench_function("attention_forward_6x8", |b| b.iter(|| attn.forward(black_box(&s)).unwrap()));
    let z = random_mat(10, 8, 5);
    let gru = GruParams::new(8, 0.5, &mut lrrec_bench::rng(6));
    c.bench_function("gru_forward_10_steps", |b| b.iter(|| gru.forward(black_box(&z)).unwrap()));
}

fn autoencoder_step(c: &mut Criterion) {
    let (p, seqs) = autoencoder(64);
    c.bench_function("ae_forward_backward_64_seqs", |b| {
        b.iter(|| {
            let mut g = p.zeros_like();
            for s in &seqs {
                let cache = p.forward(s).unwrap();
                let (_, dl) = ce_with_grad(&cache.logits, s, None, 1.0);
                p.backward(&cache, &dl, &mut g);
            }
            g
        })
    });
}

fn recommender_step(c: &mut Criterion) {
    let (p, batch) = recommender(256);
    c.bench_function("rec_loss_and_grad_batch_256", |b| {
        b.iter(|| {
            let mut g = p.zero_grads();
            loss_and_grad(&p, black_box(&batch), &mut g).unwrap()
        })
    });
}

fn regression(c: &mut Criterion) {
    let mut group = c.benchmark_group("regression");
    group.sample_size(10);
    let (x, y) = sparse_design(1000, 1000, 20, 7);
    group.bench_function("lasso_n1000_p1000", |b| b.iter(|| lasso_fit(&x, &y, 0.08).unwrap()));
    let envs = gen_multi_env(&EnvConfig::default()).unwrap();
    group.bench_function("eills_enumeration_p8", |b| b.iter(|| eills_fit_smallp(&envs, 0.01, 6.9).unwrap()));
    group.finish();
}

fn metrics(c: &mut Criterion) {
    let n = 10_000;
    let labels: Vec<f64> = (0..n).map(|i| (i % 3 == 0) as u8 as f64).collect();
    let scores: Vec<f64> = (0..n).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
    c.bench_function("auc_10k", |b| b.iter(|| auc(black_box(&labels), black_box(&scores)).unwrap()));
}

criterion_group!(benches, nn_kernels, autoencoder_step, recommender_step, regression, metrics);
criterion_main!(benches);
