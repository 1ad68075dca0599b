//! Differentiable Q-function models over feature vectors.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A parameterized `Q(x, a; w)` over a fixed-length feature vector `x`.
///
/// Implementations supply the forward pass and a vector-Jacobian product;
/// everything else in the training code is written against this trait.
pub trait QModel {
    fn n_params(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    fn q_values(&self, x: &[f64]) -> Vec<f64>;

    /// `out += sum_a coeffs[a] * grad_w Q(x, a)`.
    fn accumulate_grad(&self, x: &[f64], coeffs: &[f64], out: &mut [f64]);

    fn value(&self, x: &[f64], a: usize) -> f64 {
        self.q_values(x)[a]
    }

    fn gradient(&self, x: &[f64], a: usize) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.n_actions()];
        coeffs[a] = 1.0;
        let mut out = vec![0.0; self.n_params()];
        self.accumulate_grad(x, &coeffs, &mut out);
        out
    }

    /// `w <- w - rate * delta`.
    fn apply_update(&mut self, delta: &[f64], rate: f64) {
        for (w, d) in self.params_mut().iter_mut().zip(delta) {
            *w -= rate * d;
        }
    }

    /// A representative input for gradient probes.
    fn random_input(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        (0..self.input_dim()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
    }
}

/// One-hot features `e_s` with one parameter per state-action pair: `Q(e_s, a) = w[s, a]`.
///
/// Non-one-hot inputs are allowed and give `Q(x, a) = sum_i x_i w[i, a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularQModel {
    n_states: usize,
    n_actions: usize,
    params: Vec<f64>,
}

impl TabularQModel {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        TabularQModel {
            n_states,
            n_actions,
            params: vec![0.0; n_states * n_actions],
        }
    }

    pub fn from_params(n_states: usize, n_actions: usize, params: Vec<f64>) -> Result<Self> {
        if params.len() != n_states * n_actions {
            return Err(Error::dim("tabular parameter length"));
        }
        Ok(TabularQModel {
            n_states,
            n_actions,
            params,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn one_hot(&self, s: usize) -> Vec<f64> {
        one_hot(self.n_states, s)
    }
}

pub fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    x[i] = 1.0;
    x
}

/// Feature table `e_0, ..., e_{n-1}` for tabular models over `n` states.
pub fn one_hot_table(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|s| one_hot(n, s)).collect()
}

impl QModel for TabularQModel {
    fn n_params(&self) -> usize {
        self.params.len()
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn input_dim(&self) -> usize {
        self.n_states
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn q_values(&self, x: &[f64]) -> Vec<f64> {
        let m = self.n_actions;
        let mut q = vec![0.0; m];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (qa, w) in q.iter_mut().zip(&self.params[i * m..(i + 1) * m]) {
                *qa += xi * w;
            }
        }
        q
    }

    fn accumulate_grad(&self, x: &[f64], coeffs: &[f64], out: &mut [f64]) {
        let m = self.n_actions;
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, c) in out[i * m..(i + 1) * m].iter_mut().zip(coeffs) {
                *o += xi * c;
            }
        }
    }

    fn random_input(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        self.one_hot(rng.random_range(0..self.n_states))
    }
}

pub type FeatureFn = Arc<dyn Fn(&[f64], usize) -> Vec<f64> + Send + Sync>;

/// `Q(x, a) = w . phi(x, a)` for a caller-supplied feature map `phi`.
#[derive(Clone)]
pub struct LinearQModel {
    input_dim: usize,
    n_actions: usize,
    params: Vec<f64>,
    phi: FeatureFn,
}

impl fmt::Debug for LinearQModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearQModel")
            .field("input_dim", &self.input_dim)
            .field("n_actions", &self.n_actions)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl LinearQModel {
    /// `phi(x, a)` must return `n_params` entries for every input and action.
    pub fn new(input_dim: usize, n_actions: usize, n_params: usize, phi: FeatureFn) -> Self {
        LinearQModel {
            input_dim,
            n_actions,
            params: vec![0.0; n_params],
            phi,
        }
    }

    /// Separate weight block and bias per action: `phi(x, a) = [0.., x, 1, ..0]` in block `a`.
    pub fn per_action(input_dim: usize, n_actions: usize) -> Self {
        let block = input_dim + 1;
        let phi: FeatureFn = Arc::new(move |x: &[f64], a: usize| {
            let mut out = vec![0.0; block * n_actions];
            out[a * block..a * block + input_dim].copy_from_slice(x);
            out[a * block + input_dim] = 1.0;
            out
        });
        Self::new(input_dim, n_actions, block * n_actions, phi)
    }

    pub fn with_params(mut self, params: Vec<f64>) -> Result<Self> {
        if params.len() != self.params.len() {
            return Err(Error::dim("linear parameter length"));
        }
        self.params = params;
        Ok(self)
    }

    pub fn features(&self, x: &[f64], a: usize) -> Vec<f64> {
        (self.phi)(x, a)
    }
}

impl QModel for LinearQModel {
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
        (0..self.n_actions)
            .map(|a| (self.phi)(x, a).iter().zip(&self.params).map(|(f, w)| f * w).sum())
            .collect()
    }

    fn accumulate_grad(&self, x: &[f64], coeffs: &[f64], out: &mut [f64]) {
        for (a, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (o, f) in out.iter_mut().zip((self.phi)(x, a)) {
                *o += c * f;
            }
        }
    }
}

/// Fills `params` with independent draws from `U(-scale, scale)`.
pub fn randomize_params<M: QModel + ?Sized, R: Rng + ?Sized>(model: &mut M, scale: f64, rng: &mut R) {
    for w in model.params_mut() {
        *w = (rng.random::<f64>() * 2.0 - 1.0) * scale;
    }
}
