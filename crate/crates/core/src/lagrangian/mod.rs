//! The nonlinear Lagrangian of the Bellman optimality constraints, its dual
//! form under the canonical multiplier, and minimax/maximin classification.

mod fixtures;
mod vform;

use serde::{Deserialize, Serialize};

use crate::bellman::{
    apply_bellman, greedy_policy, optimal_j_by_enumeration, solve_q_star, DiscountFn, TabularQ, TieBreak,
};
use crate::elp::{performance_j, rollout, stationary_distribution, EpisodicProcess, Estimate, Mode, Policy};
use crate::error::{Error, Result};

pub use fixtures::{fig3_elp, fig3_q_const, fig3_q_max, fig3_q_star};
pub use vform::{vform_counterexample, Constraint, LpCheck, VFormCounterexample, VFormMdp};

/// Default absolute tolerance for classification checks.
pub const CLASSIFY_TOL: f64 = 1e-8;

/// Nonnegative weights `lambda(s,a)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Multiplier {
    n_states: usize,
    n_actions: usize,
    weights: Vec<f64>,
}

impl Multiplier {
    pub fn new(n_states: usize, n_actions: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n_states * n_actions {
            return Err(Error::dim("multiplier length"));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::arg(format!(
                "multiplier weight {w} is not a finite nonnegative number"
            )));
        }
        Ok(Multiplier {
            n_states,
            n_actions,
            weights,
        })
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Multiplier {
            n_states,
            n_actions,
            weights: vec![0.0; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.weights[s * self.n_actions + a]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn bellman_epi(process: &EpisodicProcess, q: &TabularQ) -> Result<TabularQ> {
    apply_bellman(process, &DiscountFn::episodic(process), q)
}

/// `E_pi[Q(S_T, A_T)]`, the expected Q-value at the last step of an episode.
pub fn terminal_expectation(process: &EpisodicProcess, pi: &Policy, q: &TabularQ, mode: Mode) -> Result<Estimate> {
    q.check_for(process)?;
    match mode {
        Mode::Exact => {
            let st = stationary_distribution(process, pi)?;
            let mass: f64 = process
                .terminal_states()
                .map(|s| st.rho_pi[s] * pi.row(s).iter().zip(q.row(s)).map(|(p, v)| p * v).sum::<f64>())
                .sum();
            Ok(Estimate::exact(st.expected_t * mass))
        }
        Mode::MonteCarlo { seed, n_episodes } => {
            let traj = rollout(process, pi, seed, n_episodes)?;
            let xs: Vec<f64> = traj
                .episode_ends
                .iter()
                .map(|&i| q.get(traj.steps[i].state, traj.steps[i].action))
                .collect();
            Ok(crate::elp::mean_and_se(&xs))
        }
    }
}

/// `L_pi(Q, lambda) = E_pi[Q(S_T,A_T)] + sum lambda(s,a) (BQ - Q)(s,a)`.
///
/// Only the first term is sampled in Monte-Carlo mode; the standard error
/// reported is that of the first term.
pub fn lagrangian_value(
    process: &EpisodicProcess,
    pi: &Policy,
    q: &TabularQ,
    lam: &Multiplier,
    mode: Mode,
) -> Result<Estimate> {
    if lam.n_states != process.n_states() || lam.n_actions != process.n_actions() {
        return Err(Error::dim("multiplier shape"));
    }
    let first = terminal_expectation(process, pi, q, mode)?;
    let bq = bellman_epi(process, q)?;
    let penalty: f64 = lam
        .weights
        .iter()
        .zip(bq.values().iter().zip(q.values()))
        .map(|(l, (b, v))| l * (b - v))
        .sum();
    Ok(Estimate {
        value: first.value + penalty,
        ..first
    })
}

/// `lambda_pi(s,a) = rho_pi(s) pi(a|s) E_pi[T]`.
pub fn canonical_multiplier(process: &EpisodicProcess, pi: &Policy) -> Result<Multiplier> {
    let st = stationary_distribution(process, pi)?;
    let (n, m) = (process.n_states(), process.n_actions());
    let weights = (0..n)
        .flat_map(|s| (0..m).map(move |a| (s, a)))
        .map(|(s, a)| (st.rho_pi[s] * pi.prob(s, a) * st.expected_t).max(0.0))
        .collect();
    Multiplier::new(n, m, weights)
}

/// `J(pi) + sum_{s not terminal} sum_a lambda_pi(s,a) (max Q(s,.) - Q(s,a))`.
pub fn dual_form_value(process: &EpisodicProcess, pi: &Policy, q: &TabularQ) -> Result<f64> {
    q.check_for(process)?;
    let j = performance_j(process, pi, Mode::Exact)?.value;
    let lam = canonical_multiplier(process, pi)?;
    let slack: f64 = process
        .non_terminal_states()
        .map(|s| {
            let max = q.max_row(s);
            (0..process.n_actions())
                .map(|a| lam.get(s, a) * (max - q.get(s, a)))
                .sum::<f64>()
        })
        .sum();
    Ok(j + slack)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDetail {
    pub state: usize,
    pub action: usize,
    /// `(BQ - Q)(s,a)`.
    pub bellman_gap: f64,
    /// `rho_pi(s) pi(a|s) (BQ - Q)(s,a)`.
    pub weighted_gap: f64,
    /// `rho_pi(s) pi(a|s) (max Q(s,.) - Q(s,a))`, zero at terminal states.
    pub weighted_slack: f64,
}

/// Saddle conditions for `(Q, lambda_pi)`:
/// `feasible_primal` is `BQ - Q <= tol` everywhere, `slack_pi_ok` is
/// complementary slackness against the Bellman gaps, `slack_q_ok` is greedy
/// alignment of `pi` with `Q` on visited non-terminal pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleReport {
    pub feasible_primal: bool,
    pub slack_pi_ok: bool,
    pub slack_q_ok: bool,
    pub max_violation: f64,
    pub tol: f64,
    pub per_pair_detail: Vec<PairDetail>,
}

impl SaddleReport {
    pub fn is_saddle(&self) -> bool {
        self.feasible_primal && self.slack_pi_ok && self.slack_q_ok
    }
}

pub fn check_saddle(process: &EpisodicProcess, pi: &Policy, q: &TabularQ, tol: f64) -> Result<SaddleReport> {
    let bq = bellman_epi(process, q)?;
    let st = stationary_distribution(process, pi)?;
    let mut detail = Vec::with_capacity(process.n_states() * process.n_actions());
    for s in 0..process.n_states() {
        let max = q.max_row(s);
        for a in 0..process.n_actions() {
            let w = st.rho_pi[s] * pi.prob(s, a);
            let gap = bq.get(s, a) - q.get(s, a);
            let slack = if process.is_terminal(s) {
                0.0
            } else {
                w * (max - q.get(s, a))
            };
            detail.push(PairDetail {
                state: s,
                action: a,
                bellman_gap: gap,
                weighted_gap: w * gap,
                weighted_slack: slack,
            });
        }
    }
    let worst = |f: fn(&PairDetail) -> f64| detail.iter().map(f).fold(0.0, f64::max);
    let v1 = worst(|d| d.bellman_gap.max(0.0));
    let v2 = worst(|d| d.weighted_gap.abs());
    let v3 = worst(|d| d.weighted_slack.abs());
    Ok(SaddleReport {
        feasible_primal: v1 <= tol,
        slack_pi_ok: v2 <= tol,
        slack_q_ok: v3 <= tol,
        max_violation: v1.max(v2).max(v3),
        tol,
        per_pair_detail: detail,
    })
}

fn objective_matches_q_star(process: &EpisodicProcess, pi: &Policy, q: &TabularQ, tol: f64) -> Result<bool> {
    let q_star = solve_q_star(process)?;
    let want = terminal_expectation(process, pi, &q_star, Mode::Exact)?.value;
    let got = terminal_expectation(process, pi, q, Mode::Exact)?.value;
    Ok((got - want).abs() <= tol)
}

/// `Q >= BQ` within `tol` and `E_pi[Q(S_T,A_T)]` at the minimum, which is attained by `Q*`.
pub fn is_minimax_q(process: &EpisodicProcess, pi: &Policy, q: &TabularQ, tol: f64) -> Result<bool> {
    let bq = bellman_epi(process, q)?;
    Ok(q.dominates(&bq, tol) && objective_matches_q_star(process, pi, q, tol)?)
}

/// `Q <= BQ` within `tol` and `E_pi[Q(S_T,A_T)]` at the maximum, which is attained by `Q*`.
pub fn is_maximin_q(process: &EpisodicProcess, pi: &Policy, q: &TabularQ, tol: f64) -> Result<bool> {
    let bq = bellman_epi(process, q)?;
    Ok(bq.dominates(q, tol) && objective_matches_q_star(process, pi, q, tol)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    /// `min_Q max_lambda L_mu = E_mu[Q*(S_T,A_T)]`.
    pub minimax_value: f64,
    /// `max_lambda min_Q L_mu`, bounded below by `min_Q L_mu(Q, lambda_mu) = J(mu)`.
    pub maximin_lower: f64,
    pub j_mu: f64,
    pub equal: bool,
    pub j_greedy_q_star: f64,
    /// Set when `mu` scores below the greedy policy of `Q*`.
    pub mu_suboptimal: bool,
}

pub fn verify_strong_duality(process: &EpisodicProcess, mu: &Policy, tol: f64) -> Result<DualityReport> {
    let q_star = solve_q_star(process)?;
    let minimax_value = terminal_expectation(process, mu, &q_star, Mode::Exact)?.value;
    let j_mu = performance_j(process, mu, Mode::Exact)?.value;
    let greedy = greedy_policy(&q_star, TieBreak::FirstIndex);
    let j_greedy_q_star = performance_j(process, &greedy, Mode::Exact)?.value;
    Ok(DualityReport {
        minimax_value,
        maximin_lower: j_mu,
        j_mu,
        equal: (minimax_value - j_mu).abs() < tol,
        j_greedy_q_star,
        mu_suboptimal: j_mu < j_greedy_q_star - tol,
    })
}

/// Whether both greedy policies of `q` reach the optimal `J` found by enumerating
/// deterministic policies.
pub fn maximin_optimality_check(process: &EpisodicProcess, q: &TabularQ, tol: f64) -> Result<bool> {
    q.check_for(process)?;
    let (best, _) = optimal_j_by_enumeration(process)?;
    for tie in [TieBreak::FirstIndex, TieBreak::Uniform] {
        let j = performance_j(process, &greedy_policy(q, tie), Mode::Exact)?.value;
        if (j - best).abs() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}
