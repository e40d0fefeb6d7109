//! Core algorithms: dataset handling, explanation generation, the text
//! AutoEncoder, the attention/GRU recommender, evaluation and the
//! multi-environment regression lab.

pub mod autoencoder;
pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod llm;
pub mod nn;
pub mod pipeline;
pub mod recsys;
pub mod theory;

pub use error::{Error, Result};
