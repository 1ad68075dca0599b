//! Stochastic gradient estimates of the smoothed Lagrangian from demonstrations.

use super::boltzmann::{boltzmann_policy, boltzmann_value_coeffs};
use super::model::QModel;
use crate::error::{Error, Result};

/// A contiguous block of demonstrated steps `s_0, a_0, ..., s_n, a_n`.
///
/// `s_0` is the terminal state that closed the previous block (or the process
/// start state). Every episode inside the block is complete, so `s_n` is terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoBatch {
    pub features: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub terminal: Vec<bool>,
    /// `R(s_t)`; used for loss reporting only.
    pub rewards: Vec<f64>,
}

impl DemoBatch {
    pub fn new(features: Vec<Vec<f64>>, actions: Vec<usize>, terminal: Vec<bool>, rewards: Vec<f64>) -> Result<Self> {
        let len = features.len();
        if actions.len() != len || terminal.len() != len || rewards.len() != len {
            return Err(Error::dim("demo batch columns differ in length"));
        }
        let batch = DemoBatch {
            features,
            actions,
            terminal,
            rewards,
        };
        if batch.n_episodes() == 0 {
            return Err(Error::arg("demo batch holds no complete episode"));
        }
        if !batch.terminal[len - 1] {
            return Err(Error::arg("demo batch must end at a terminal state"));
        }
        Ok(batch)
    }

    /// `n`, the number of transitions.
    pub fn n_transitions(&self) -> usize {
        self.features.len().saturating_sub(1)
    }

    /// `k`, the number of terminal states among `s_1..s_n`.
    pub fn n_episodes(&self) -> usize {
        self.terminal.iter().skip(1).filter(|&&t| t).count()
    }
}

/// How the successor value `V(s') = sum_a pi^beta(a|s') Q(s',a)` enters the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Successor {
    /// Through the Boltzmann weights as well (LAMIN1).
    Differentiated,
    /// Weights held fixed (LAMIN2).
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub beta: f64,
    /// Known `E_mu[T]` replacing the `n / k` estimate.
    pub expected_t: Option<f64>,
}

impl EstimatorConfig {
    pub fn new(beta: f64) -> Self {
        EstimatorConfig { beta, expected_t: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub delta: Vec<f64>,
    /// Sample estimate of the objective at the current parameters.
    pub loss: f64,
}

impl Update {
    pub fn grad_norm(&self) -> f64 {
        self.delta.iter().map(|d| d * d).sum::<f64>().sqrt()
    }
}

/// Shared body of both estimators:
/// `(1/k) sum_{t>=1, s_t terminal} grad Q(s_t,a_t)
///  + c sum_{t<n} [gamma(s_{t+1}) grad V(s_{t+1}) - grad Q(s_t,a_t)]`
/// with `c = 1/k`, or `E[T]/n` when the expected episode length is supplied.
pub fn lagrangian_update<M: QModel + ?Sized>(
    model: &M,
    batch: &DemoBatch,
    cfg: &EstimatorConfig,
    successor: Successor,
) -> Result<Update> {
    if successor == Successor::Differentiated && !(cfg.beta > 0.0) {
        return Err(Error::arg("LAMIN1 needs a positive temperature"));
    }
    let n = batch.n_transitions();
    let k = batch.n_episodes();
    if k == 0 {
        return Err(Error::arg("demo batch holds no complete episode"));
    }
    let inv_k = 1.0 / k as f64;
    let c = match cfg.expected_t {
        Some(et) => et / n as f64,
        None => inv_k,
    };
    let m = model.n_actions();
    let mut delta = vec![0.0; model.n_params()];
    let mut coeffs = vec![0.0; m];
    let mut loss = 0.0;
    for t in 0..=n {
        let x = &batch.features[t];
        let a = batch.actions[t];
        if a >= m {
            return Err(Error::dim("demo action out of range"));
        }
        let q = model.q_values(x);
        coeffs.iter_mut().for_each(|v| *v = 0.0);
        if t > 0 {
            // successor role for transition t-1
            loss += c * batch.rewards[t];
            if !batch.terminal[t] {
                let pi = boltzmann_policy(&q, cfg.beta);
                loss += c * pi.iter().zip(&q).map(|(p, v)| p * v).sum::<f64>();
                let w = match successor {
                    Successor::Differentiated => boltzmann_value_coeffs(&q, cfg.beta),
                    Successor::Frozen => pi,
                };
                for (o, wa) in coeffs.iter_mut().zip(w) {
                    *o += c * wa;
                }
            } else {
                coeffs[a] += inv_k;
                loss += inv_k * q[a];
            }
        }
        if t < n {
            coeffs[a] -= c;
            loss -= c * q[a];
        }
        model.accumulate_grad(x, &coeffs, &mut delta);
    }
    Ok(Update { delta, loss })
}

/// One LAMIN1 gradient estimate (Boltzmann weights differentiated).
pub fn lamin1_update<M: QModel + ?Sized>(model: &M, batch: &DemoBatch, cfg: &EstimatorConfig) -> Result<Update> {
    lagrangian_update(model, batch, cfg, Successor::Differentiated)
}

/// One LAMIN2 gradient estimate (Boltzmann weights frozen; `beta = 0` is greedy).
pub fn lamin2_update<M: QModel + ?Sized>(model: &M, batch: &DemoBatch, cfg: &EstimatorConfig) -> Result<Update> {
    lagrangian_update(model, batch, cfg, Successor::Frozen)
}

/// Cross-entropy of `softmax(Q)` against the demonstrated action, averaged over
/// non-terminal steps.
pub fn behavior_cloning_update<M: QModel + ?Sized>(model: &M, batch: &DemoBatch) -> Result<Update> {
    let steps: Vec<usize> = (0..batch.features.len()).filter(|&t| !batch.terminal[t]).collect();
    if steps.is_empty() {
        return Err(Error::arg("demo batch has no non-terminal steps"));
    }
    let scale = 1.0 / steps.len() as f64;
    let mut delta = vec![0.0; model.n_params()];
    let mut loss = 0.0;
    for t in steps {
        let x = &batch.features[t];
        let a = batch.actions[t];
        let mut p = boltzmann_policy(&model.q_values(x), 1.0);
        loss -= scale * p[a].max(f64::MIN_POSITIVE).ln();
        p[a] -= 1.0;
        p.iter_mut().for_each(|v| *v *= scale);
        model.accumulate_grad(x, &p, &mut delta);
    }
    Ok(Update { delta, loss })
}
