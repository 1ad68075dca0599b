//! Four-state discounted MDP whose LP-optimal V-function ties the two actions
//! at the initial state. Rewards here sit on state-action pairs.

use serde::Serialize;

pub const GAMMA_C: f64 = 0.5;

/// `next[s][a]` and `reward[s][a]` for states 0..=3 and actions 0..=1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VFormMdp {
    pub gamma: f64,
    pub next: [[usize; 2]; 4],
    pub reward: [[f64; 2]; 4],
    pub initial: usize,
}

/// One LP constraint `V(s) >= reward + gamma V(next)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub state: usize,
    pub actions: Vec<usize>,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpCheck {
    pub feasible: bool,
    pub constraints: Vec<Constraint>,
    /// `(1 - gamma) V(initial)`.
    pub objective: f64,
    /// Lower bound on the objective over all feasible `V`.
    pub optimum_lower_bound: f64,
    pub attains_optimum: bool,
    /// One-step backups `R(0,a) + gamma V(next(0,a))` for both actions.
    pub backups_at_initial: [f64; 2],
    pub backups_tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VFormCounterexample {
    pub mdp: VFormMdp,
    pub v_min: [f64; 4],
    pub v_star: [f64; 4],
    pub lp_check: LpCheck,
}

impl VFormMdp {
    pub fn new() -> Self {
        VFormMdp {
            gamma: GAMMA_C,
            next: [[1, 2], [3, 3], [3, 3], [3, 3]],
            reward: [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [0.0, 0.0]],
            initial: 0,
        }
    }

    pub fn backup(&self, v: &[f64; 4], s: usize, a: usize) -> f64 {
        self.reward[s][a] + self.gamma * v[self.next[s][a]]
    }

    /// Optimal values by value iteration on the V-form equation.
    pub fn v_star(&self) -> [f64; 4] {
        let mut v = [0.0; 4];
        for _ in 0..200 {
            let mut next = [0.0; 4];
            for (s, out) in next.iter_mut().enumerate() {
                *out = self.backup(&v, s, 0).max(self.backup(&v, s, 1));
            }
            v = next;
        }
        v
    }

    /// Evaluates the LP constraints at `v`. Constraints whose right-hand sides
    /// coincide across actions are merged, giving five in total.
    pub fn check(&self, v: &[f64; 4], tol: f64) -> LpCheck {
        let mut constraints: Vec<Constraint> = Vec::new();
        for s in 0..4 {
            for a in 0..2 {
                let slack = v[s] - self.backup(v, s, a);
                match constraints
                    .iter_mut()
                    .find(|c| c.state == s && self.next[s][c.actions[0]] == self.next[s][a])
                {
                    Some(c) if self.reward[s][c.actions[0]] == self.reward[s][a] => c.actions.push(a),
                    _ => constraints.push(Constraint {
                        state: s,
                        actions: vec![a],
                        slack,
                    }),
                }
            }
        }
        let feasible = constraints.iter().all(|c| c.slack >= -tol);
        let objective = (1.0 - self.gamma) * v[self.initial];
        // V(3) >= gamma V(3) forces V(3) >= 0, then V(2) >= 2 and V(0) >= gamma V(2) >= 1.
        let v3 = 0.0;
        let v2 = self.reward[2][0] + self.gamma * v3;
        let v0 = self.gamma * v2;
        let optimum_lower_bound = (1.0 - self.gamma) * v0;
        let backups = [self.backup(v, 0, 0), self.backup(v, 0, 1)];
        LpCheck {
            feasible,
            constraints,
            objective,
            optimum_lower_bound,
            attains_optimum: feasible && (objective - optimum_lower_bound).abs() <= tol,
            backups_at_initial: backups,
            backups_tie: (backups[0] - backups[1]).abs() <= tol,
        }
    }
}

impl Default for VFormMdp {
    fn default() -> Self {
        Self::new()
    }
}

pub fn vform_counterexample() -> VFormCounterexample {
    let mdp = VFormMdp::new();
    let v_min = [1.0, 2.0, 2.0, 0.0];
    let lp_check = mdp.check(&v_min, 1e-12);
    VFormCounterexample {
        v_star: mdp.v_star(),
        mdp,
        v_min,
        lp_check,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v_min_is_lp_optimal_and_ties() {
        let ex = vform_counterexample();
        let c = &ex.lp_check;
        assert_eq!(c.constraints.len(), 5);
        assert!(c.feasible && c.attains_optimum && c.backups_tie);
        assert_eq!(c.objective, 0.5);
        assert_eq!(c.backups_at_initial, [1.0, 1.0]);
    }

    #[test]
    fn optimal_value_at_initial_state() {
        let v = VFormMdp::new().v_star();
        assert_eq!(v, [1.0, 1.0, 2.0, 0.0]);
    }

    #[test]
    fn zero_v_is_infeasible() {
        let c = VFormMdp::new().check(&[0.0; 4], 1e-12);
        assert!(!c.feasible);
        let bad: Vec<_> = c
            .constraints
            .iter()
            .filter(|c| c.slack < 0.0)
            .map(|c| c.state)
            .collect();
        assert_eq!(bad, vec![1, 2]);
    }
}
