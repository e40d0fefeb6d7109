//! Hand-written forward/backward building blocks shared by the AutoEncoder
//! and the recommendation network.
//!
//! Every layer exposes a `forward` that returns its output together with a
//! cache, and a `backward` that consumes the cache plus the upstream gradient,
//! accumulates parameter gradients into a caller-provided buffer and returns
//! the gradient with respect to its input.

pub mod attention;
pub mod dense;
pub mod gru;
mod init;
mod mat;

pub use attention::{AttentionCache, AttentionGrads, AttentionParams};
pub use dense::Dense;
pub use gru::{GruCache, GruParams};
pub use init::Init;
pub use mat::{axpy, dot, Mat};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax of one row, in place.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

/// `log Σ exp(row)`
pub fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
