//! The six-state example process and its reference Q-tables.

use crate::bellman::TabularQ;
use crate::elp::EpisodicProcess;

/// States `0..=5`, actions named `"1"`, `"2"`, `"3"` (indices 0..=2).
///
/// From state 0 action `k` moves to state `k`; state 1 leads to terminal state 4
/// (reward 1), states 2 and 3 lead to terminal state 5 (reward 2). Both terminals
/// reset to state 0, and the process starts at state 4.
pub fn fig3_elp() -> EpisodicProcess {
    let mut reset = vec![0.0; 6];
    reset[0] = 1.0;
    EpisodicProcess::builder(6, 3)
        .action_names(["1", "2", "3"])
        .goto(0, 0, 1)
        .goto(0, 1, 2)
        .goto(0, 2, 3)
        .goto_all(1, 4)
        .goto_all(2, 5)
        .goto_all(3, 5)
        .terminal(4)
        .terminal(5)
        .reward(4, 1.0)
        .reward(5, 2.0)
        .reset(reset)
        .start(4)
        .build()
        .expect("fixture is well formed")
}

/// Optimal Q-function of [`fig3_elp`].
pub fn fig3_q_star() -> TabularQ {
    TabularQ::from_fn(6, 3, |s, a| match (s, a) {
        (0, 0) | (1, _) => 1.0,
        _ => 2.0,
    })
}

/// A maximin Q-function of [`fig3_elp`] that is not `Q*`.
pub fn fig3_q_max() -> TabularQ {
    TabularQ::from_fn(6, 3, |s, a| match (s, a) {
        (0, 0) | (1, _) | (0, 2) => 1.0,
        (3, _) => 1.5,
        _ => 2.0,
    })
}

/// The constant table `Q = 2`, minimax but with a sub-optimal greedy policy.
pub fn fig3_q_const() -> TabularQ {
    TabularQ::constant(6, 3, 2.0)
}
