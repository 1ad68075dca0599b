use rand::Rng;

use crate::error::{Error, Result};

use super::STOCHASTIC_TOL;

/// Stochastic action-selection matrix `pi(a|s)`, stored row-major `[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::dim(format!(
                "policy has {} entries, expected {}x{}",
                probs.len(),
                n_states,
                n_actions
            )));
        }
        for s in 0..n_states {
            let row = &probs[s * n_actions..(s + 1) * n_actions];
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::arg(format!(
                    "policy row {s} is not a probability vector (sum {sum})"
                )));
            }
        }
        Ok(Policy {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Policy {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Puts all mass on `actions[s]` at each state.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::dim(format!("action {a} out of range at state {s}")));
            }
            probs[s * n_actions + a] = 1.0;
        }
        Ok(Policy {
            n_states: actions.len(),
            n_actions,
            probs,
        })
    }

    /// Same action everywhere.
    pub fn constant(n_states: usize, n_actions: usize, action: usize) -> Result<Self> {
        Self::deterministic(n_actions, &vec![action; n_states])
    }

    /// Random full-support policy, rows drawn from a flat Dirichlet.
    pub fn random<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> Self {
        let mut probs = Vec::with_capacity(n_states * n_actions);
        for _ in 0..n_states {
            let row: Vec<f64> = (0..n_actions).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let z: f64 = row.iter().sum();
            probs.extend(row.into_iter().map(|x| x / z));
        }
        renormalize_rows(&mut probs, n_actions);
        Policy {
            n_states,
            n_actions,
            probs,
        }
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Index of the single action with probability one, if the row is deterministic.
    pub fn deterministic_action(&self, s: usize) -> Option<usize> {
        self.row(s).iter().position(|&p| p == 1.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        sample_index(self.row(s), rng)
    }
}

/// Inverse-CDF draw from a probability vector. Falls back to the last
/// positive entry when rounding leaves the CDF short of `u`.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn renormalize_rows(probs: &mut [f64], width: usize) {
    for row in probs.chunks_mut(width) {
        let z: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= z);
        // push the residual rounding into the largest entry
        let sum: f64 = row.iter().sum();
        if let Some(i) = (0..row.len()).max_by(|&i, &j| row[i].total_cmp(&row[j])) {
            row[i] += 1.0 - sum;
        }
    }
}
