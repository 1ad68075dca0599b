use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::policy::sample_index;
use super::{EpisodicProcess, Policy};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
}

/// A multi-episode rollout.
///
/// `steps` starts at `t = 1`; the step-0 terminal state and the action drawn
/// there are kept apart in `start_state` / `start_action` and never appear in
/// `steps`. `episode_ends[i]` indexes the terminal step closing episode `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub episode_ends: Vec<usize>,
    pub rng_seed: u64,
    pub start_state: usize,
    pub start_action: usize,
}

impl Trajectory {
    pub fn n_episodes(&self) -> usize {
        self.episode_ends.len()
    }

    /// Episodes as slices of `steps`, each ending at its terminal step.
    pub fn episodes(&self) -> impl Iterator<Item = &[Step]> + '_ {
        let mut begin = 0;
        self.episode_ends.iter().map(move |&end| {
            let ep = &self.steps[begin..=end];
            begin = end + 1;
            ep
        })
    }

    /// The final terminal step, used to continue a stream of blocks.
    pub fn last_step(&self) -> Option<&Step> {
        self.steps.last()
    }
}

/// Simulates `n_episodes` complete episodes from the process start state.
pub fn rollout(process: &EpisodicProcess, pi: &Policy, rng_seed: u64, n_episodes: usize) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let start_action = pi.sample(process.start_state(), &mut rng);
    let mut traj = rollout_from(process, pi, &mut rng, process.start_state(), start_action, n_episodes)?;
    traj.rng_seed = rng_seed;
    Ok(traj)
}

/// Simulates from an explicit step-0 pair, drawing from a caller-owned generator.
/// The returned trajectory reports `rng_seed = 0`.
pub fn rollout_from<R: Rng + ?Sized>(
    process: &EpisodicProcess,
    pi: &Policy,
    rng: &mut R,
    start_state: usize,
    start_action: usize,
    n_episodes: usize,
) -> Result<Trajectory> {
    process.check_policy(pi)?;
    if n_episodes == 0 {
        return Err(Error::arg("rollout needs at least one episode"));
    }
    if start_state >= process.n_states() || start_action >= process.n_actions() {
        return Err(Error::dim("start pair out of range"));
    }
    let mut steps = Vec::new();
    let mut episode_ends = Vec::with_capacity(n_episodes);
    let (mut s, mut a) = (start_state, start_action);
    while episode_ends.len() < n_episodes {
        s = sample_index(process.row(s, a), rng);
        a = pi.sample(s, rng);
        steps.push(Step {
            state: s,
            action: a,
            reward: process.reward(s),
        });
        if process.is_terminal(s) {
            episode_ends.push(steps.len() - 1);
        }
    }
    Ok(Trajectory {
        steps,
        episode_ends,
        rng_seed: 0,
        start_state,
        start_action,
    })
}
