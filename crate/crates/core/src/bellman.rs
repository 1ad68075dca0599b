//! Generalized Bellman optimality operator, value iteration and on-policy values.

use crate::elp::{EpisodicProcess, Policy};
use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 100_000;
/// Two Q-values closer than this count as tied when forming greedy policies.
pub const TIE_TOL: f64 = 1e-12;

/// State-dependent discount `gamma(s)` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountFn {
    gamma: Vec<f64>,
}

impl DiscountFn {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if let Some((s, g)) = gamma.iter().enumerate().find(|(_, g)| !(0.0..=1.0).contains(*g)) {
            return Err(Error::arg(format!("discount {g} at state {s} is outside [0, 1]")));
        }
        Ok(DiscountFn { gamma })
    }

    /// One on non-terminal states, zero on terminal states.
    pub fn episodic(process: &EpisodicProcess) -> Self {
        DiscountFn {
            gamma: (0..process.n_states()).map(|s| process.gamma_epi(s)).collect(),
        }
    }

    pub fn constant(n_states: usize, gamma: f64) -> Result<Self> {
        Self::new(vec![gamma; n_states])
    }

    #[inline]
    pub fn get(&self, s: usize) -> f64 {
        self.gamma[s]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.gamma
    }

    /// Requires `gamma(s) < 1` on every terminal state, which makes the operator
    /// have a unique, globally attracting fixed point on an ELP.
    pub fn check_for(&self, process: &EpisodicProcess) -> Result<()> {
        if self.gamma.len() != process.n_states() {
            return Err(Error::dim("discount vector length"));
        }
        if let Some(s) = process.terminal_states().find(|&s| self.gamma[s] >= 1.0) {
            return Err(Error::Precondition(format!(
                "discount at terminal state {} must be < 1",
                process.state_names()[s]
            )));
        }
        Ok(())
    }
}

/// Dense Q-table, row-major `[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularQ {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl TabularQ {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::dim("Q-table length"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("Q-table has non-finite entries"));
        }
        Ok(TabularQ {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::constant(n_states, n_actions, 0.0)
    }

    pub fn constant(n_states: usize, n_actions: usize, c: f64) -> Self {
        TabularQ {
            n_states,
            n_actions,
            values: vec![c; n_states * n_actions],
        }
    }

    pub fn from_fn(n_states: usize, n_actions: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let values = (0..n_states)
            .flat_map(|s| (0..n_actions).map(move |a| (s, a)))
            .map(|(s, a)| f(s, a))
            .collect();
        TabularQ {
            n_states,
            n_actions,
            values,
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
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    #[inline]
    pub fn max_row(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        TabularQ {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn sup_distance(&self, other: &TabularQ) -> f64 {
        linalg::sup_norm_diff(&self.values, &other.values)
    }

    /// `self >= other - tol` entrywise.
    pub fn dominates(&self, other: &TabularQ, tol: f64) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| *a >= *b - tol)
    }

    pub(crate) fn check_for(&self, process: &EpisodicProcess) -> Result<()> {
        if self.n_states != process.n_states() || self.n_actions != process.n_actions() {
            return Err(Error::dim(format!(
                "Q-table is {}x{}, process is {}x{}",
                self.n_states,
                self.n_actions,
                process.n_states(),
                process.n_actions()
            )));
        }
        Ok(())
    }
}

/// One synchronous sweep of `(B^gamma Q)(s,a) = sum_s' P(s'|s,a) (R(s') + gamma(s') max_a' Q(s',a'))`.
pub fn apply_bellman(process: &EpisodicProcess, gamma: &DiscountFn, q: &TabularQ) -> Result<TabularQ> {
    q.check_for(process)?;
    if gamma.as_slice().len() != process.n_states() {
        return Err(Error::dim("discount vector length"));
    }
    Ok(bellman_sweep(process, gamma, q))
}

fn bellman_sweep(process: &EpisodicProcess, gamma: &DiscountFn, q: &TabularQ) -> TabularQ {
    let n = process.n_states();
    let m = process.n_actions();
    let backup: Vec<f64> = (0..n)
        .map(|t| {
            let g = gamma.get(t);
            process.reward(t) + if g == 0.0 { 0.0 } else { g * q.max_row(t) }
        })
        .collect();
    let mut values = Vec::with_capacity(n * m);
    for s in 0..n {
        for a in 0..m {
            values.push(
                process
                    .row(s, a)
                    .iter()
                    .zip(&backup)
                    .filter(|(p, _)| **p != 0.0)
                    .map(|(p, b)| p * b)
                    .sum(),
            );
        }
    }
    TabularQ {
        n_states: n,
        n_actions: m,
        values,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueIteration {
    pub q: TabularQ,
    /// Number of operator applications performed.
    pub iterations: usize,
    /// `sup |B Q - Q|` at the returned iterate.
    pub residual: f64,
    pub converged: bool,
}

/// Iterates `Q <- B^gamma Q` until the residual `d(Q, B^gamma Q)` drops below `tol`.
///
/// The operator is not a one-step contraction, so no monotone-decrease check is
/// applied. When `max_iters` runs out the last iterate comes back with
/// `converged = false`.
pub fn value_iteration(
    process: &EpisodicProcess,
    gamma: &DiscountFn,
    q0: &TabularQ,
    tol: f64,
    max_iters: usize,
) -> Result<ValueIteration> {
    q0.check_for(process)?;
    gamma.check_for(process)?;
    let mut q = q0.clone();
    let mut iterations = 0;
    loop {
        let next = bellman_sweep(process, gamma, &q);
        iterations += 1;
        let residual = q.sup_distance(&next);
        if residual <= tol || iterations >= max_iters {
            return Ok(ValueIteration {
                q,
                iterations,
                residual,
                converged: residual <= tol,
            });
        }
        q = next;
    }
}

/// `Q*` under episodic discounting, from a zero start with the default tolerances.
pub fn solve_q_star(process: &EpisodicProcess) -> Result<TabularQ> {
    let vi = value_iteration(
        process,
        &DiscountFn::episodic(process),
        &TabularQ::zeros(process.n_states(), process.n_actions()),
        DEFAULT_TOL,
        DEFAULT_MAX_ITERS,
    )?;
    if !vi.converged {
        return Err(Error::NotConverged {
            iterations: vi.iterations,
            residual: vi.residual,
        });
    }
    Ok(vi.q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// All mass on the lowest maximizing action index.
    #[default]
    FirstIndex,
    /// Mass split evenly across maximizers.
    Uniform,
}

/// Greedy policy of `q`; actions within [`TIE_TOL`] of the row max count as maximizers.
pub fn greedy_policy(q: &TabularQ, tie_break: TieBreak) -> Policy {
    let m = q.n_actions();
    let mut probs = vec![0.0; q.n_states() * m];
    for s in 0..q.n_states() {
        let max = q.max_row(s);
        let maximizers: Vec<usize> = (0..m).filter(|&a| q.get(s, a) >= max - TIE_TOL).collect();
        let out = &mut probs[s * m..(s + 1) * m];
        match tie_break {
            TieBreak::FirstIndex => out[maximizers[0]] = 1.0,
            TieBreak::Uniform => {
                let w = 1.0 / maximizers.len() as f64;
                for &a in &maximizers {
                    out[a] = w;
                }
            }
        }
    }
    Policy::new(q.n_states(), m, probs).expect("greedy rows are stochastic")
}

/// Solves `Q_pi(s,a) = sum_s' P(s'|s,a) (R(s') + gamma_epi(s') sum_a' pi(a'|s') Q_pi(s',a'))`
/// as one dense system of size `|S||A|`. Every terminal entry equals `J(pi)`.
pub fn on_policy_value(process: &EpisodicProcess, pi: &Policy) -> Result<TabularQ> {
    process.check_policy(pi)?;
    let n = process.n_states();
    let m = process.n_actions();
    let dim = n * m;
    let mut a = vec![0.0; dim * dim];
    let mut b = vec![0.0; dim];
    for s in 0..n {
        for act in 0..m {
            let i = s * m + act;
            a[i * dim + i] += 1.0;
            for (t, &p) in process.row(s, act).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                b[i] += p * process.reward(t);
                let g = process.gamma_epi(t);
                if g == 0.0 {
                    continue;
                }
                for (act2, &w) in pi.row(t).iter().enumerate() {
                    a[i * dim + t * m + act2] -= p * g * w;
                }
            }
        }
    }
    let values = linalg::solve(dim, a, b, "solving for on-policy values")?;
    TabularQ::new(n, m, values)
}

/// Whether `B^gamma q1 >= B^gamma q2` entrywise (within `1e-12`), given `q1 >= q2`.
pub fn monotonicity_check(process: &EpisodicProcess, gamma: &DiscountFn, q1: &TabularQ, q2: &TabularQ) -> Result<bool> {
    if !q1.dominates(q2, 0.0) {
        return Err(Error::Precondition("monotonicity check needs q1 >= q2".into()));
    }
    let b1 = apply_bellman(process, gamma, q1)?;
    let b2 = apply_bellman(process, gamma, q2)?;
    Ok(b1.dominates(&b2, 1e-12))
}

/// Best `J` over all deterministic stationary policies, by exhaustive enumeration.
///
/// Only non-terminal states are enumerated since actions at terminal states do not
/// affect the episode. Each candidate is scored with a state-level first-passage
/// solve, independent of the Bellman machinery. Returns the optimum and a maximizer.
pub fn optimal_j_by_enumeration(process: &EpisodicProcess) -> Result<(f64, Policy)> {
    let m = process.n_actions();
    let inner: Vec<usize> = process.non_terminal_states().collect();
    let count = (m as u64)
        .checked_pow(inner.len() as u32)
        .filter(|&c| c <= 1 << 22)
        .ok_or_else(|| Error::arg("too many deterministic policies to enumerate"))?;
    let mut actions = vec![0usize; process.n_states()];
    let mut best: Option<(f64, Policy)> = None;
    for code in 0..count {
        let mut c = code;
        for &s in &inner {
            actions[s] = (c % m as u64) as usize;
            c /= m as u64;
        }
        let pi = Policy::deterministic(m, &actions)?;
        let j = crate::elp::expected_episode_sum(process, &pi, process.rewards())?;
        if best.as_ref().is_none_or(|(b, _)| j > *b) {
            best = Some((j, pi));
        }
    }
    Ok(best.expect("at least one policy"))
}
