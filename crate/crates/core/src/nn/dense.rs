use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Mat;

/// Fully connected layer `y = W x + b` with `W: out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Mat,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, scale: f64, rng: &mut R) -> Self {
        Dense {
            w: Mat::uniform(outputs, inputs, scale, rng),
            b: vec![0.0; outputs],
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            w: Mat::zeros(outputs, inputs),
            b: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.cols
    }

    pub fn outputs(&self) -> usize {
        self.w.rows
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.w.mul_vec(x);
        for (yi, bi) in y.iter_mut().zip(&self.b) {
            *yi += bi;
        }
        y
    }

    /// Accumulates `∂L/∂W`, `∂L/∂b` into `grad` and returns `∂L/∂x`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense) -> Vec<f64> {
        grad.w.add_outer(dy, x);
        for (g, d) in grad.b.iter_mut().zip(dy) {
            *g += d;
        }
        self.w.t_mul_vec(dy)
    }

    pub fn zeros_like(&self) -> Self {
        Dense::zeros(self.inputs(), self.outputs())
    }

    pub fn sgd_step(&mut self, grad: &Dense, lr: f64) {
        for (w, g) in self.w.data.iter_mut().zip(&grad.w.data) {
            *w -= lr * g;
        }
        for (b, g) in self.b.iter_mut().zip(&grad.b) {
            *b -= lr * g;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.b.iter().all(|x| x.is_finite())
    }

    pub fn param_count(&self) -> usize {
        self.w.data.len() + self.b.len()
    }
}
