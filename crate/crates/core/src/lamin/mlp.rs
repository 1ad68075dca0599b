//! One-hidden-layer tanh network with a linear output head per action.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::QModel;
use crate::error::{Error, Result};

/// Parameters are stored flat as `[W1 (hidden x input), b1, W2 (actions x hidden), b2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpQModel {
    input_dim: usize,
    hidden: usize,
    n_actions: usize,
    params: Vec<f64>,
}

impl MlpQModel {
    /// Weights drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases likewise.
    pub fn new(input_dim: usize, hidden: usize, n_actions: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Self::param_count(input_dim, hidden, n_actions);
        let mut params = Vec::with_capacity(n);
        let s1 = 1.0 / (input_dim as f64).sqrt();
        let s2 = 1.0 / (hidden as f64).sqrt();
        for _ in 0..hidden * (input_dim + 1) {
            params.push((rng.random::<f64>() * 2.0 - 1.0) * s1);
        }
        for _ in 0..n_actions * (hidden + 1) {
            params.push((rng.random::<f64>() * 2.0 - 1.0) * s2);
        }
        MlpQModel {
            input_dim,
            hidden,
            n_actions,
            params,
        }
    }

    pub fn from_params(input_dim: usize, hidden: usize, n_actions: usize, params: Vec<f64>) -> Result<Self> {
        if params.len() != Self::param_count(input_dim, hidden, n_actions) {
            return Err(Error::dim("MLP parameter length"));
        }
        Ok(MlpQModel {
            input_dim,
            hidden,
            n_actions,
            params,
        })
    }

    pub fn param_count(input_dim: usize, hidden: usize, n_actions: usize) -> usize {
        hidden * (input_dim + 1) + n_actions * (hidden + 1)
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.input_dim;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.n_actions * self.hidden;
        (b1, w2, b2)
    }

    fn hidden_layer(&self, x: &[f64]) -> Vec<f64> {
        let d = self.input_dim;
        let (b1, _, _) = self.offsets();
        let mut z = self.params[b1..b1 + self.hidden].to_vec();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, zj) in z.iter_mut().enumerate() {
                *zj += self.params[j * d + i] * xi;
            }
        }
        z.iter().map(|v| v.tanh()).collect()
    }
}

impl QModel for MlpQModel {
    fn n_params(&self) -> usize {
        self.params.len()
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn q_values(&self, x: &[f64]) -> Vec<f64> {
        let h = self.hidden_layer(x);
        let (_, w2, b2) = self.offsets();
        (0..self.n_actions)
            .map(|a| {
                let row = &self.params[w2 + a * self.hidden..w2 + (a + 1) * self.hidden];
                self.params[b2 + a] + row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    fn accumulate_grad(&self, x: &[f64], coeffs: &[f64], out: &mut [f64]) {
        let h = self.hidden_layer(x);
        let (b1, w2, b2) = self.offsets();
        let (d, hid) = (self.input_dim, self.hidden);
        let mut g_h = vec![0.0; hid];
        for (a, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            out[b2 + a] += c;
            let row = w2 + a * hid;
            for j in 0..hid {
                out[row + j] += c * h[j];
                g_h[j] += c * self.params[row + j];
            }
        }
        // back through tanh
        let g_z: Vec<f64> = g_h.iter().zip(&h).map(|(g, v)| g * (1.0 - v * v)).collect();
        for (j, &gz) in g_z.iter().enumerate() {
            out[b1 + j] += gz;
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, &gz) in g_z.iter().enumerate() {
                out[j * d + i] += gz * xi;
            }
        }
    }
}
