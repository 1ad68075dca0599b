//! Exact evaluation of the Boltzmann-smoothed Lagrangian at the canonical multiplier.

use super::boltzmann::{boltzmann_value, boltzmann_value_coeffs};
use super::model::QModel;
use crate::elp::{stationary_distribution, EpisodicProcess, Policy};
use crate::error::{Error, Result};

/// One non-terminal state with two actions: `J + V^beta(q1, q2) - q1`, where the
/// demonstrator takes action 1.
pub fn smoothed_lagrangian_1state(q1: f64, q2: f64, beta: f64, j_mu: f64) -> f64 {
    j_mu + boltzmann_value(&[q1, q2], beta) - q1
}

/// Minimizes a unimodal function on `[lo, hi]` by golden-section search.
/// Returns `(argmin, min)`.
pub fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    let x = (lo + hi) / 2.0;
    (x, f(x))
}

fn check_features<M: QModel + ?Sized>(process: &EpisodicProcess, model: &M, features: &[Vec<f64>]) -> Result<()> {
    if features.len() != process.n_states() || model.n_actions() != process.n_actions() {
        return Err(Error::dim("feature table or model does not match the process"));
    }
    Ok(())
}

/// `L^beta_mu(Q, lambda_mu) = E_mu[Q(S_T,A_T)]
///   + E_mu[T] sum_{s,a} rho_mu(s) mu(a|s) sum_s' P(s'|s,a) (R(s') + gamma(s') V^beta(s') - Q(s,a))`.
pub fn smoothed_lagrangian_exact<M: QModel + ?Sized>(
    process: &EpisodicProcess,
    mu: &Policy,
    model: &M,
    features: &[Vec<f64>],
    beta: f64,
) -> Result<f64> {
    check_features(process, model, features)?;
    let st = stationary_distribution(process, mu)?;
    let q: Vec<Vec<f64>> = features.iter().map(|x| model.q_values(x)).collect();
    let backup: Vec<f64> = (0..process.n_states())
        .map(|s| process.reward(s) + process.gamma_epi(s) * boltzmann_value(&q[s], beta))
        .collect();
    let mut total = 0.0;
    for s in 0..process.n_states() {
        for a in 0..process.n_actions() {
            let w = st.rho_pi[s] * mu.prob(s, a);
            if w == 0.0 {
                continue;
            }
            if process.is_terminal(s) {
                total += w * q[s][a];
            }
            let next: f64 = process.row(s, a).iter().zip(&backup).map(|(p, b)| p * b).sum();
            total += w * (next - q[s][a]);
        }
    }
    Ok(st.expected_t * total)
}

/// Gradient of [`smoothed_lagrangian_exact`] with respect to the model parameters.
pub fn smoothed_lagrangian_gradient_exact<M: QModel + ?Sized>(
    process: &EpisodicProcess,
    mu: &Policy,
    model: &M,
    features: &[Vec<f64>],
    beta: f64,
) -> Result<Vec<f64>> {
    check_features(process, model, features)?;
    let st = stationary_distribution(process, mu)?;
    let (n, m) = (process.n_states(), process.n_actions());
    // per-state action coefficients, accumulated before one backward pass per state
    let mut coeffs = vec![vec![0.0; m]; n];
    let mut inflow = vec![0.0; n];
    for s in 0..n {
        for a in 0..m {
            let w = st.expected_t * st.rho_pi[s] * mu.prob(s, a);
            if w == 0.0 {
                continue;
            }
            if process.is_terminal(s) {
                coeffs[s][a] += w;
            }
            coeffs[s][a] -= w;
            for (t, p) in process.row(s, a).iter().enumerate() {
                inflow[t] += w * p;
            }
        }
    }
    let mut grad = vec![0.0; model.n_params()];
    for s in 0..n {
        let g = process.gamma_epi(s);
        if inflow[s] != 0.0 && g != 0.0 {
            let c = boltzmann_value_coeffs(&model.q_values(&features[s]), beta);
            for (o, v) in coeffs[s].iter_mut().zip(c) {
                *o += inflow[s] * g * v;
            }
        }
        if coeffs[s].iter().any(|v| *v != 0.0) {
            model.accumulate_grad(&features[s], &coeffs[s], &mut grad);
        }
    }
    Ok(grad)
}
