//! Reference computations for the integration tests. These deliberately avoid
//! the library's linear solvers: everything here is plain fixed-point iteration
//! or brute-force enumeration.
#![allow(dead_code)]

use qlagrange::elp::{DiscountedMdp, EpisodicProcess, Policy};
use qlagrange::lamin::{DemoBatch, QModel};

/// `h(s) = f(s) + [s non-terminal] sum_a pi(a|s) sum_s' P(s'|s,a) h(s')`, iterated to a fixed point.
pub fn episode_sum_from(p: &EpisodicProcess, pi: &Policy, f: &[f64]) -> Vec<f64> {
    let n = p.n_states();
    let mut h = vec![0.0; n];
    for _ in 0..1_000_000 {
        let mut next = f.to_vec();
        for s in 0..n {
            if p.is_terminal(s) {
                continue;
            }
            for a in 0..p.n_actions() {
                let w = pi.prob(s, a);
                if w != 0.0 {
                    next[s] += w * p.row(s, a).iter().zip(&h).map(|(q, v)| q * v).sum::<f64>();
                }
            }
        }
        let diff = next.iter().zip(&h).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        h = next;
        if diff < 1e-15 * (1.0 + h.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
            return h;
        }
    }
    panic!("episode sum iteration did not settle");
}

/// `E[sum_{t=1}^T f(S_t)]` for an episode entered through the reset distribution.
pub fn episode_sum(p: &EpisodicProcess, pi: &Policy, f: &[f64]) -> f64 {
    let h = episode_sum_from(p, pi, f);
    p.reset_dist().iter().zip(&h).map(|(r, v)| r * v).sum()
}

pub fn policy_j(p: &EpisodicProcess, pi: &Policy) -> f64 {
    episode_sum(p, pi, p.rewards())
}

pub fn expected_length(p: &EpisodicProcess, pi: &Policy) -> f64 {
    episode_sum(p, pi, &vec![1.0; p.n_states()])
}

/// Best `J` over deterministic policies, choosing actions at non-terminal states only.
pub fn enumerate_optimum(p: &EpisodicProcess) -> f64 {
    enumerate_optimal_policy(p).0
}

/// The best deterministic policy and its `J`; the first one found wins ties.
pub fn enumerate_optimal_policy(p: &EpisodicProcess) -> (f64, Policy) {
    let inner: Vec<usize> = p.non_terminal_states().collect();
    let m = p.n_actions();
    let mut choice = vec![0usize; p.n_states()];
    let mut best = (f64::NEG_INFINITY, Policy::uniform(p.n_states(), m));
    loop {
        let pi = Policy::deterministic(m, &choice).unwrap();
        let j = policy_j(p, &pi);
        if j > best.0 + 1e-12 {
            best = (j, pi);
        }
        // odometer over the non-terminal states
        let mut i = 0;
        loop {
            if i == inner.len() {
                return best;
            }
            let s = inner[i];
            choice[s] += 1;
            if choice[s] < m {
                break;
            }
            choice[s] = 0;
            i += 1;
        }
    }
}

/// Stationary distribution of the policy's chain by power iteration on the lazy
/// chain `(I + P_pi) / 2`, which shares it and is aperiodic.
pub fn stationary_oracle(p: &EpisodicProcess, pi: &Policy) -> Vec<f64> {
    let n = p.n_states();
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..2_000_000 {
        let mut next = vec![0.0; n];
        for s in 0..n {
            next[s] += 0.5 * x[s];
            for a in 0..p.n_actions() {
                let w = 0.5 * x[s] * pi.prob(s, a);
                if w != 0.0 {
                    for (t, q) in p.row(s, a).iter().enumerate() {
                        next[t] += w * q;
                    }
                }
            }
        }
        let diff = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum::<f64>();
        x = next;
        if diff < 1e-16 {
            break;
        }
    }
    x
}

/// `initial . (I - gamma P_pi)^{-1} R` by fixed-point iteration.
pub fn discounted_return(mdp: &DiscountedMdp, pi: &Policy, gamma: f64) -> f64 {
    let n = mdp.n_states;
    let mut v = vec![0.0; n];
    for _ in 0..100_000 {
        let mut next = mdp.reward.clone();
        for s in 0..n {
            for a in 0..mdp.n_actions {
                let w = pi.prob(s, a);
                next[s] += gamma * w * mdp.row(s, a).iter().zip(&v).map(|(q, x)| q * x).sum::<f64>();
            }
        }
        let diff = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if diff < 1e-15 {
            break;
        }
    }
    mdp.initial.iter().zip(&v).map(|(a, b)| a * b).sum()
}

/// Every single-episode demonstration block with its probability: the block
/// opens at a terminal state drawn from the stationary terminal mix, then
/// follows `mu` until the next terminal state. Paths are cut below `cutoff` mass.
pub fn enumerate_blocks(p: &EpisodicProcess, mu: &Policy, features: &[Vec<f64>], cutoff: f64) -> Vec<(f64, DemoBatch)> {
    let st = stationary_oracle(p, mu);
    let term_mass: f64 = p.terminal_states().map(|s| st[s]).sum();
    let mut out = Vec::new();
    let mut stack: Vec<(f64, Vec<(usize, usize)>)> = Vec::new();
    for s0 in p.terminal_states() {
        for a0 in 0..p.n_actions() {
            let w = st[s0] / term_mass * mu.prob(s0, a0);
            if w > 0.0 {
                stack.push((w, vec![(s0, a0)]));
            }
        }
    }
    while let Some((w, path)) = stack.pop() {
        let &(s, a) = path.last().unwrap();
        for (t, q) in p.row(s, a).iter().enumerate() {
            for b in 0..p.n_actions() {
                let wt = w * q * mu.prob(t, b);
                if wt <= cutoff {
                    continue;
                }
                let mut next = path.clone();
                next.push((t, b));
                if p.is_terminal(t) {
                    let batch = DemoBatch::new(
                        next.iter().map(|&(s, _)| features[s].clone()).collect(),
                        next.iter().map(|&(_, a)| a).collect(),
                        next.iter().map(|&(s, _)| p.is_terminal(s)).collect(),
                        next.iter().map(|&(s, _)| p.reward(s)).collect(),
                    )
                    .unwrap();
                    out.push((wt, batch));
                } else {
                    stack.push((wt, next));
                }
            }
        }
    }
    out
}

/// Central differences of `f` in every parameter with step `h`, divided by the
/// step actually represented in floating point.
pub fn central_difference<M: QModel + ?Sized>(model: &mut M, h: f64, f: impl Fn(&M) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(model.n_params());
    for i in 0..model.n_params() {
        let w = model.params()[i];
        let (wp, wm) = (w + h, w - h);
        model.params_mut()[i] = wp;
        let up = f(model);
        model.params_mut()[i] = wm;
        let down = f(model);
        model.params_mut()[i] = w;
        out.push((up - down) / (wp - wm));
    }
    out
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(a).max(norm(b)).max(1e-12)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Five-point central stencil `(-f(w+2h) + 8f(w+h) - 8f(w-h) + f(w-2h)) / 12h`,
/// fourth-order accurate, so a larger `h` keeps rounding error small.
pub fn central_difference5<M: QModel + ?Sized>(model: &mut M, h: f64, f: impl Fn(&M) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(model.n_params());
    for i in 0..model.n_params() {
        let w = model.params()[i];
        let mut at = |k: f64| {
            model.params_mut()[i] = w + k * h;
            f(model)
        };
        let (p2, p1, m1, m2) = (at(2.0), at(1.0), at(-1.0), at(-2.0));
        model.params_mut()[i] = w;
        out.push((-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h));
    }
    out
}
