//! Seeded weight initialisation schemes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dense, Mat};

/// Weight initialisation. Embeddings draw from `uniform(−emb_scale,
/// emb_scale)`. Dense weights use `uniform(−dense_scale, dense_scale)` when
/// set and Glorot-uniform, `±√(6/(in+out))`, otherwise. Biases start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Init {
    pub emb_scale: f64,
    pub dense_scale: Option<f64>,
}

impl Default for Init {
    fn default() -> Self {
        Init {
            emb_scale: 1.0,
            dense_scale: None,
        }
    }
}

impl Init {
    pub fn uniform(scale: f64) -> Self {
        Init {
            emb_scale: scale,
            dense_scale: Some(scale),
        }
    }

    pub fn dense<R: Rng + ?Sized>(self, inputs: usize, outputs: usize, rng: &mut R) -> Dense {
        let s = self
            .dense_scale
            .unwrap_or_else(|| (6.0 / (inputs + outputs) as f64).sqrt());
        Dense::new(inputs, outputs, s, rng)
    }

    /// Square `dim × dim` matrix: uniform(±dense_scale) or Glorot.
    pub fn square<R: Rng + ?Sized>(self, dim: usize, rng: &mut R) -> Mat {
        let s = self.dense_scale.unwrap_or_else(|| (3.0 / dim as f64).sqrt());
        Mat::uniform(dim, dim, s, rng)
    }

    pub fn embedding<R: Rng + ?Sized>(self, rows: usize, dim: usize, rng: &mut R) -> Mat {
        Mat::uniform(rows, dim, self.emb_scale, rng)
    }
}
