//! Seeded fixtures shared by the benchmarks.

use lrrec_core::autoencoder::{encode_corpus, Activation, AutoEncoderParams, Init, Vocab};
use lrrec_core::nn::Mat;
use lrrec_core::recsys::{RecExample, RecModelParams, Task, Variant, CONTEXT_DIM, EMBED_DIM};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mat(rows: usize, cols: usize, seed: u64) -> Mat {
    Mat::uniform(rows, cols, 1.0, &mut rng(seed))
}

/// AutoEncoder at the default shape (maxlen 50, dim 8) and an encoded corpus.
pub fn autoencoder(n_sentences: usize) -> (AutoEncoderParams, Vec<Vec<usize>>) {
    let words = ["cozy", "quiet", "spicy", "bright", "cheap", "loud", "clean", "fresh"];
    let corpus: Vec<String> = (0..n_sentences)
        .map(|i| {
            format!(
                "the consumer likes {} and the product is {}",
                words[i % words.len()],
                words[(i / words.len()) % words.len()]
            )
        })
        .collect();
    let vocab = Vocab::build(&corpus).expect("non-empty corpus");
    let params = AutoEncoderParams::new(vocab, 50, 8, Activation::Relu, Init::default(), &mut rng(1));
    let seqs = encode_corpus(&corpus, &params.vocab, 50);
    (params, seqs)
}

/// Full-variant recommender with 200 consumers, 50 products, history 10.
pub fn recommender(batch: usize) -> (RecModelParams, Vec<RecExample>) {
    let mut r = rng(2);
    let users: Vec<String> = (0..200).map(|i| format!("u{i}")).collect();
    let items: Vec<String> = (0..50).map(|i| format!("i{i}")).collect();
    let params = RecModelParams::new(users, items, Variant::Full, Task::Classification, false, 10, Init::default(), &mut r)
        .expect("valid shapes");
    let examples = (0..batch)
        .map(|k| RecExample {
            key: format!("r{k}"),
            user: r.gen_range(0..200),
            item: r.gen_range(1..=50),
            history: (0..10).map(|_| r.gen_range(1..=50)).collect(),
            pos: (0..EMBED_DIM).map(|_| r.gen_range(-1.0..1.0)).collect(),
            neg: (0..EMBED_DIM).map(|_| r.gen_range(-1.0..1.0)).collect(),
            context: (0..CONTEXT_DIM).map(|_| r.gen_range(-1.0..1.0)).collect(),
            target: (k % 2) as f64,
        })
        .collect();
    (params, examples)
}

/// Sparse linear design `y = Xβ + ε` with `s` unit coefficients.
pub fn sparse_design(n: usize, p: usize, s: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut r = rng(seed);
    let x = DMatrix::from_fn(n, p, |_, _| r.gen_range(-1.7..1.7));
    let beta = DVector::from_fn(p, |j, _| if j < s { 1.0 } else { 0.0 });
    let noise = DVector::from_fn(n, |_, _| r.gen_range(-1.0..1.0));
    let y = &x * beta + noise;
    (x, y)
}
