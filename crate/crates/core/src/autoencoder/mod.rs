//! Word-level MLP AutoEncoder. Its 8-unit bottleneck turns each explanation
//! text into the dense vector fed to the recommender.

mod model;
mod train;
mod vocab;

pub use model::{ae_loss, ce_with_grad, Activation, AeCache, AutoEncoderParams, BOTTLENECK, HIDDEN};
pub use train::{
    corpus_loss, embed_explanation, encode_corpus, reconstruction_accuracy, train_autoencoder,
    train_params, AeHyper, AeOptimizer, AeTrained, Reduction,
};
pub use crate::nn::Init;
pub use vocab::{tokenize, tokenize_pad, Vocab, PAD, PAD_ID, UNK, UNK_ID};
