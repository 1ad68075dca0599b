use super::model::QModel;

/// `pi(a) = exp(q_a / beta) / sum_b exp(q_b / beta)`, shifted by the max for safety.
///
/// `beta <= 0` is read as the zero-temperature limit: all mass on the first maximizer.
pub fn boltzmann_policy(q: &[f64], beta: f64) -> Vec<f64> {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if beta <= 0.0 {
        let best = q.iter().position(|&v| v == max).unwrap_or(0);
        let mut p = vec![0.0; q.len()];
        p[best] = 1.0;
        return p;
    }
    let mut p: Vec<f64> = q.iter().map(|&v| ((v - max) / beta).exp()).collect();
    let z: f64 = p.iter().sum();
    for v in &mut p {
        *v /= z;
    }
    p
}

/// `sum_a pi^beta(a) q_a`.
pub fn boltzmann_value(q: &[f64], beta: f64) -> f64 {
    boltzmann_policy(q, beta).iter().zip(q).map(|(p, v)| p * v).sum()
}

/// Per-action weights `c_a` with `grad sum_a pi^beta(a) Q_a = sum_a c_a grad Q_a`:
/// `c_a = pi_a (1 + (Q_a - V) / beta)` where `V = sum_b pi_b Q_b`.
pub fn boltzmann_value_coeffs(q: &[f64], beta: f64) -> Vec<f64> {
    let p = boltzmann_policy(q, beta);
    if beta <= 0.0 {
        return p;
    }
    let v: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
    p.iter().zip(q).map(|(pa, qa)| pa * (1.0 + (qa - v) / beta)).collect()
}

/// `grad_w sum_a pi^beta_w(a) Q(x, a; w)`, differentiating through the weights.
pub fn boltzmann_value_gradient<M: QModel + ?Sized>(model: &M, x: &[f64], beta: f64) -> Vec<f64> {
    let coeffs = boltzmann_value_coeffs(&model.q_values(x), beta);
    let mut out = vec![0.0; model.n_params()];
    model.accumulate_grad(x, &coeffs, &mut out);
    out
}

/// `sum_a pi^beta(a) grad_w Q(x, a; w)` with the weights held fixed. At `beta = 0`
/// this is the gradient of `Q` at the first maximizing action.
pub fn frozen_boltzmann_gradient<M: QModel + ?Sized>(model: &M, x: &[f64], beta: f64) -> Vec<f64> {
    let coeffs = boltzmann_policy(&model.q_values(x), beta);
    let mut out = vec![0.0; model.n_params()];
    model.accumulate_grad(x, &coeffs, &mut out);
    out
}

/// `r_next + gamma_next * q_next - q_cur`.
pub fn td_error(r_next: f64, gamma_next: f64, q_next: f64, q_cur: f64) -> f64 {
    r_next + gamma_next * q_next - q_cur
}
