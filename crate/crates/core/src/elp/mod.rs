//! Finite episodic learning processes (ELPs).
//!
//! An ELP is a finite MDP with state rewards whose terminal states all reset
//! to the same distribution under every action, whose episodes terminate in
//! finite expected time under every policy, and which starts at step 0 from a
//! terminal state.

mod chain;
mod discounted;
mod policy;
pub mod random;
mod rollout;

use std::fmt;

pub use chain::{
    ergodic_transform, ergodic_transform_mc, expected_episode_sum, induced_chain, performance_j,
    stationary_distribution, ErgodicSides, StationaryDistribution,
};
pub use discounted::{discounted_to_elp, DiscountedMdp};
pub use policy::Policy;
pub use rollout::{rollout, rollout_from, Step, Trajectory};

use crate::error::{Error, Result};
pub(crate) use chain::mean_and_se;

/// Absolute tolerance used for stochasticity checks.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// How an expectation is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    MonteCarlo { seed: u64, n_episodes: usize },
}

/// A point estimate. Exact evaluations carry a zero standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
    pub n: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            std_err: 0.0,
            n: 0,
        }
    }

    /// Whether `target` lies within `k` standard errors of the estimate.
    pub fn within_std_errs(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_err
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodicProcess {
    state_names: Vec<String>,
    action_names: Vec<String>,
    /// `P(s'|s,a)` stored row-major as `[s][a][s']`.
    transition: Vec<f64>,
    reward: Vec<f64>,
    reset: Vec<f64>,
    terminal: Vec<bool>,
    start_state: usize,
}

impl EpisodicProcess {
    pub fn builder(n_states: usize, n_actions: usize) -> ProcessBuilder {
        ProcessBuilder::new(n_states, n_actions)
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.reward.len()
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.action_names.len()
    }

    #[inline]
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let n = self.n_states();
        let off = (s * self.n_actions() + a) * n;
        &self.transition[off..off + n]
    }

    #[inline]
    pub fn reward(&self, s: usize) -> f64 {
        self.reward[s]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    pub fn reset_dist(&self) -> &[f64] {
        &self.reset
    }

    #[inline]
    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal_mask(&self) -> &[bool] {
        &self.terminal
    }

    pub fn terminal_states(&self) -> impl Iterator<Item = usize> + '_ {
        self.terminal.iter().enumerate().filter_map(|(s, &t)| t.then_some(s))
    }

    pub fn non_terminal_states(&self) -> impl Iterator<Item = usize> + '_ {
        self.terminal.iter().enumerate().filter_map(|(s, &t)| (!t).then_some(s))
    }

    pub fn start_state(&self) -> usize {
        self.start_state
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_names.iter().position(|n| n == name)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.action_names.iter().position(|n| n == name)
    }

    /// Episodic discount `1{s not terminal}` for state `s`.
    #[inline]
    pub fn gamma_epi(&self, s: usize) -> f64 {
        if self.terminal[s] {
            0.0
        } else {
            1.0
        }
    }

    /// Checks every ELP condition and reports each violation found.
    pub fn validate(&self) -> ValidationReport {
        validate_elp(self)
    }

    /// Returns an error carrying the validation report unless the process is a valid ELP.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidProcess(report))
        }
    }

    pub(crate) fn check_policy(&self, pi: &Policy) -> Result<()> {
        if pi.n_states() != self.n_states() || pi.n_actions() != self.n_actions() {
            return Err(Error::dim(format!(
                "policy is {}x{}, process is {}x{}",
                pi.n_states(),
                pi.n_actions(),
                self.n_states(),
                self.n_actions()
            )));
        }
        Ok(())
    }

    /// Returns a copy with the transition row for `(s, a)` replaced. Shape is checked,
    /// stochasticity is not; run [`validate`](Self::validate) afterwards.
    pub fn with_row(&self, s: usize, a: usize, row: &[f64]) -> Result<Self> {
        let n = self.n_states();
        if s >= n || a >= self.n_actions() || row.len() != n {
            return Err(Error::dim("row replacement out of range"));
        }
        let mut out = self.clone();
        let off = (s * self.n_actions() + a) * n;
        out.transition[off..off + n].copy_from_slice(row);
        Ok(out)
    }

    pub fn with_rewards(&self, reward: Vec<f64>) -> Result<Self> {
        if reward.len() != self.n_states() {
            return Err(Error::dim("reward vector length"));
        }
        Ok(EpisodicProcess { reward, ..self.clone() })
    }
}

/// Incremental constructor. Rows left unset for terminal states default to the
/// reset distribution; rows left unset for non-terminal states are an error.
#[derive(Debug, Clone)]
pub struct ProcessBuilder {
    n_states: usize,
    n_actions: usize,
    state_names: Option<Vec<String>>,
    action_names: Option<Vec<String>>,
    rows: Vec<Option<Vec<f64>>>,
    reward: Vec<f64>,
    reset: Option<Vec<f64>>,
    terminal: Vec<bool>,
    start_state: Option<usize>,
}

impl ProcessBuilder {
    fn new(n_states: usize, n_actions: usize) -> Self {
        ProcessBuilder {
            n_states,
            n_actions,
            state_names: None,
            action_names: None,
            rows: vec![None; n_states * n_actions],
            reward: vec![0.0; n_states],
            reset: None,
            terminal: vec![false; n_states],
            start_state: None,
        }
    }

    pub fn state_names<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.state_names = Some(names.into_iter().map(Into::into).collect());
        self
    }

    pub fn action_names<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.action_names = Some(names.into_iter().map(Into::into).collect());
        self
    }

    pub fn transition(mut self, s: usize, a: usize, row: Vec<f64>) -> Self {
        self.rows[s * self.n_actions + a] = Some(row);
        self
    }

    /// Sets the same row for every action of `s`.
    pub fn transition_all(mut self, s: usize, row: Vec<f64>) -> Self {
        for a in 0..self.n_actions {
            self.rows[s * self.n_actions + a] = Some(row.clone());
        }
        self
    }

    /// Deterministic move `s --a--> next`.
    pub fn goto(self, s: usize, a: usize, next: usize) -> Self {
        let mut row = vec![0.0; self.n_states];
        row[next] = 1.0;
        self.transition(s, a, row)
    }

    pub fn goto_all(self, s: usize, next: usize) -> Self {
        let mut row = vec![0.0; self.n_states];
        row[next] = 1.0;
        self.transition_all(s, row)
    }

    pub fn reward(mut self, s: usize, r: f64) -> Self {
        self.reward[s] = r;
        self
    }

    pub fn rewards(mut self, r: Vec<f64>) -> Self {
        self.reward = r;
        self
    }

    pub fn reset(mut self, dist: Vec<f64>) -> Self {
        self.reset = Some(dist);
        self
    }

    pub fn terminal(mut self, s: usize) -> Self {
        self.terminal[s] = true;
        self
    }

    pub fn start(mut self, s: usize) -> Self {
        self.start_state = Some(s);
        self
    }

    /// Assembles the process. Only shapes are checked here.
    pub fn build(self) -> Result<EpisodicProcess> {
        let n = self.n_states;
        let m = self.n_actions;
        if n == 0 || m == 0 {
            return Err(Error::dim("process needs at least one state and one action"));
        }
        let state_names = self
            .state_names
            .unwrap_or_else(|| (0..n).map(|i| i.to_string()).collect());
        let action_names = self
            .action_names
            .unwrap_or_else(|| (0..m).map(|i| i.to_string()).collect());
        if state_names.len() != n || action_names.len() != m {
            return Err(Error::dim("name list length"));
        }
        if self.reward.len() != n {
            return Err(Error::dim("reward vector length"));
        }
        let reset = self.reset.ok_or_else(|| Error::arg("reset distribution not set"))?;
        if reset.len() != n {
            return Err(Error::dim("reset distribution length"));
        }
        let start_state = self
            .start_state
            .or_else(|| self.terminal.iter().position(|&t| t))
            .ok_or_else(|| Error::arg("start state not set and no terminal state exists"))?;
        if start_state >= n {
            return Err(Error::dim("start state out of range"));
        }
        let mut transition = Vec::with_capacity(n * m * n);
        for s in 0..n {
            for a in 0..m {
                match &self.rows[s * m + a] {
                    Some(row) if row.len() == n => transition.extend_from_slice(row),
                    Some(_) => {
                        return Err(Error::dim(format!(
                            "transition row ({}, {}) has wrong length",
                            state_names[s], action_names[a]
                        )))
                    }
                    None if self.terminal[s] => transition.extend_from_slice(&reset),
                    None => {
                        return Err(Error::arg(format!(
                            "missing transition row for non-terminal ({}, {})",
                            state_names[s], action_names[a]
                        )))
                    }
                }
            }
        }
        Ok(EpisodicProcess {
            state_names,
            action_names,
            transition,
            reward: self.reward,
            reset,
            terminal: self.terminal,
            start_state,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Row `P(.|s,a)` has a negative entry or does not sum to one.
    NonStochasticRow {
        state: usize,
        action: usize,
        sum: f64,
        min: f64,
    },
    NonStochasticReset {
        sum: f64,
        min: f64,
    },
    /// A terminal row differs from the reset distribution.
    ResetHomogeneity {
        state: usize,
        action: usize,
    },
    /// Non-terminal states from which some policy never terminates.
    TrappedSet {
        states: Vec<usize>,
    },
    StartNotTerminal {
        state: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    state_names: Vec<String>,
    action_names: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// The trapped set, if the finite-time condition fails.
    pub fn trapped_set(&self) -> Option<&[usize]> {
        self.violations.iter().find_map(|v| match v {
            Violation::TrappedSet { states } => Some(states.as_slice()),
            _ => None,
        })
    }

    pub fn lines(&self) -> Vec<String> {
        let sn = |s: usize| self.state_names[s].as_str();
        let an = |a: usize| self.action_names[a].as_str();
        self.violations
            .iter()
            .map(|v| match v {
                Violation::NonStochasticRow {
                    state,
                    action,
                    sum,
                    min,
                } => format!(
                    "non-stochastic row: state={} action={} sum={sum} min={min}",
                    sn(*state),
                    an(*action)
                ),
                Violation::NonStochasticReset { sum, min } => {
                    format!("non-stochastic reset distribution: sum={sum} min={min}")
                }
                Violation::ResetHomogeneity { state, action } => format!(
                    "reset-homogeneity violation: terminal state={} action={} does not transition by the reset distribution",
                    sn(*state),
                    an(*action)
                ),
                Violation::TrappedSet { states } => format!(
                    "finite-time violation: trapped set {{{}}}",
                    states.iter().map(|&s| sn(s)).collect::<Vec<_>>().join(",")
                ),
                Violation::StartNotTerminal { state } => {
                    format!("start state {} is not terminal", sn(*state))
                }
            })
            .collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in self.lines() {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

fn stochastic_stats(row: &[f64]) -> (f64, f64) {
    let sum: f64 = row.iter().sum();
    let min = row.iter().copied().fold(f64::INFINITY, f64::min);
    (sum, min)
}

fn is_stochastic(row: &[f64]) -> bool {
    let (sum, min) = stochastic_stats(row);
    min >= 0.0 && (sum - 1.0).abs() <= STOCHASTIC_TOL && row.iter().all(|p| p.is_finite())
}

/// Validates the three ELP conditions plus stochasticity of every row.
pub fn validate_elp(process: &EpisodicProcess) -> ValidationReport {
    let n = process.n_states();
    let m = process.n_actions();
    let mut violations = Vec::new();

    for s in 0..n {
        for a in 0..m {
            let row = process.row(s, a);
            if !is_stochastic(row) {
                let (sum, min) = stochastic_stats(row);
                violations.push(Violation::NonStochasticRow {
                    state: s,
                    action: a,
                    sum,
                    min,
                });
            }
        }
    }
    if !is_stochastic(&process.reset) {
        let (sum, min) = stochastic_stats(&process.reset);
        violations.push(Violation::NonStochasticReset { sum, min });
    }
    for s in process.terminal_states() {
        for a in 0..m {
            if process.row(s, a) != process.reset.as_slice() {
                violations.push(Violation::ResetHomogeneity { state: s, action: a });
            }
        }
    }

    let trapped = trapped_set(process);
    if !trapped.is_empty() {
        violations.push(Violation::TrappedSet { states: trapped });
    }
    if !process.is_terminal(process.start_state) {
        violations.push(Violation::StartNotTerminal {
            state: process.start_state,
        });
    }

    ValidationReport {
        violations,
        state_names: process.state_names.clone(),
        action_names: process.action_names.clone(),
    }
}

/// Greatest set of non-terminal states that some action choice keeps closed.
///
/// Peels `X <- {s in X : exists a, support P(.|s,a) within X}` from `X = S \ S_term`
/// until it stops shrinking. Empty iff every policy terminates in finite expected time.
pub fn trapped_set(process: &EpisodicProcess) -> Vec<usize> {
    let n = process.n_states();
    let mut inside: Vec<bool> = (0..n).map(|s| !process.is_terminal(s)).collect();
    loop {
        let mut changed = false;
        for s in 0..n {
            if !inside[s] {
                continue;
            }
            let keeps = (0..process.n_actions()).any(|a| {
                process
                    .row(s, a)
                    .iter()
                    .enumerate()
                    .all(|(t, &p)| p <= 0.0 || inside[t])
            });
            if !keeps {
                inside[s] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..n).filter(|&s| inside[s]).collect()
}
