use crate::error::{Error, Result};

use super::{EpisodicProcess, Policy, STOCHASTIC_TOL};

/// A non-terminating MDP with state rewards, scored by
/// `E[sum_{t>=1} gamma^{t-1} R(S_t)]` with `S_1 ~ initial`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// Row-major `[s][a][s']`.
    pub transition: Vec<f64>,
    pub reward: Vec<f64>,
    pub initial: Vec<f64>,
}

impl DiscountedMdp {
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let off = (s * self.n_actions + a) * self.n_states;
        &self.transition[off..off + self.n_states]
    }

    fn check(&self) -> Result<()> {
        let n = self.n_states;
        if self.transition.len() != n * self.n_actions * n || self.reward.len() != n || self.initial.len() != n {
            return Err(Error::dim("discounted MDP shapes"));
        }
        let stochastic =
            |row: &[f64]| row.iter().all(|p| *p >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() <= STOCHASTIC_TOL;
        if !self.transition.chunks(n).all(stochastic) || !stochastic(&self.initial) {
            return Err(Error::arg("discounted MDP rows must be stochastic"));
        }
        Ok(())
    }

    /// Extends a policy on this MDP with a uniform row for the appended terminal state.
    pub fn lift_policy(&self, pi: &Policy) -> Result<Policy> {
        if pi.n_states() != self.n_states || pi.n_actions() != self.n_actions {
            return Err(Error::dim("policy does not match the discounted MDP"));
        }
        let mut probs = pi.probs().to_vec();
        probs.extend(std::iter::repeat_n(1.0 / self.n_actions as f64, self.n_actions));
        Policy::new(self.n_states + 1, self.n_actions, probs)
    }
}

/// Recasts a discounted MDP as an ELP by adding a zero-reward terminal state
/// entered with probability `1 - gamma_c` from every state under every action.
///
/// The new terminal state is the last index; it resets into the source's
/// initial distribution and is the step-0 state.
pub fn discounted_to_elp(mdp: &DiscountedMdp, gamma_c: f64) -> Result<EpisodicProcess> {
    if !(gamma_c > 0.0 && gamma_c < 1.0) {
        return Err(Error::arg(format!("discount {gamma_c} is not in (0, 1)")));
    }
    mdp.check()?;
    let n = mdp.n_states;
    let bot = n;
    let mut reset = mdp.initial.clone();
    reset.push(0.0);
    let mut rewards = mdp.reward.clone();
    rewards.push(0.0);
    let mut builder = EpisodicProcess::builder(n + 1, mdp.n_actions)
        .rewards(rewards)
        .reset(reset)
        .terminal(bot)
        .start(bot);
    for s in 0..n {
        for a in 0..mdp.n_actions {
            let mut row: Vec<f64> = mdp.row(s, a).iter().map(|p| gamma_c * p).collect();
            row.push(1.0 - gamma_c);
            builder = builder.transition(s, a, row);
        }
    }
    let names: Vec<String> = (0..n).map(|s| s.to_string()).chain(["bot".to_string()]).collect();
    builder.state_names(names).build()
}
