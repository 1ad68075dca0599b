//! Random valid ELPs and discounted MDPs for sweeps, property tests and examples.

use rand::Rng;

use super::{DiscountedMdp, EpisodicProcess};

fn random_simplex<R: Rng + ?Sized>(rng: &mut R, support: &[usize], n: usize) -> Vec<f64> {
    let mut row = vec![0.0; n];
    let w: Vec<f64> = support
        .iter()
        .map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3)
        .collect();
    let z: f64 = w.iter().sum();
    for (&i, wi) in support.iter().zip(w) {
        row[i] += wi / z;
    }
    fix_sum(&mut row);
    row
}

fn fix_sum(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    if let Some(i) = (0..row.len()).max_by(|&i, &j| row[i].total_cmp(&row[j])) {
        row[i] += 1.0 - sum;
    }
}

/// A random valid ELP with `n_terminal` terminal states at the highest indices.
///
/// Each non-terminal row is either a deterministic move to a higher-indexed state
/// or a random distribution that sends at least 10% of its mass to terminal states,
/// so every policy terminates in finite expected time.
pub fn random_elp<R: Rng + ?Sized>(
    rng: &mut R,
    n_states: usize,
    n_actions: usize,
    n_terminal: usize,
) -> EpisodicProcess {
    assert!(n_terminal >= 1 && n_terminal <= n_states && n_actions >= 1);
    let n_inner = n_states - n_terminal;
    let terminals: Vec<usize> = (n_inner..n_states).collect();

    let reset = if n_inner == 0 || rng.random_bool(0.2) {
        let support: Vec<usize> = (0..n_states).collect();
        random_simplex(rng, &support, n_states)
    } else {
        let mut support: Vec<usize> = (0..n_inner).filter(|_| rng.random_bool(0.6)).collect();
        if support.is_empty() {
            support.push(rng.random_range(0..n_inner));
        }
        random_simplex(rng, &support, n_states)
    };

    let mut builder = EpisodicProcess::builder(n_states, n_actions).reset(reset);
    for &t in &terminals {
        builder = builder.terminal(t);
    }
    let start = terminals[rng.random_range(0..terminals.len())];
    builder = builder.start(start);

    for s in 0..n_states {
        builder = builder.reward(s, rng.random::<f64>() * 3.0 - 1.0);
    }
    for s in 0..n_inner {
        for a in 0..n_actions {
            let row = if rng.random_bool(0.35) {
                let next = rng.random_range(s + 1..n_states);
                let mut row = vec![0.0; n_states];
                row[next] = 1.0;
                row
            } else {
                let inner: Vec<usize> = (0..n_inner).filter(|_| rng.random_bool(0.5)).collect();
                let exit: Vec<usize> = terminals.iter().copied().filter(|_| rng.random_bool(0.7)).collect();
                let exit = if exit.is_empty() {
                    vec![terminals[rng.random_range(0..terminals.len())]]
                } else {
                    exit
                };
                let exit_mass = if inner.is_empty() {
                    1.0
                } else {
                    0.1 + 0.9 * rng.random::<f64>()
                };
                let mut row = vec![0.0; n_states];
                if !inner.is_empty() {
                    for (i, p) in random_simplex(rng, &inner, n_states).into_iter().enumerate() {
                        row[i] += (1.0 - exit_mass) * p;
                    }
                }
                for (i, p) in random_simplex(rng, &exit, n_states).into_iter().enumerate() {
                    row[i] += exit_mass * p;
                }
                fix_sum(&mut row);
                row
            };
            builder = builder.transition(s, a, row);
        }
    }
    builder.build().expect("random ELP shapes are consistent")
}

/// A random ELP with `2 <= |S| <= max_states` and `1 <= |A| <= max_actions`.
pub fn random_small_elp<R: Rng + ?Sized>(rng: &mut R, max_states: usize, max_actions: usize) -> EpisodicProcess {
    let n_states = rng.random_range(2..=max_states.max(2));
    let n_actions = rng.random_range(1..=max_actions.max(1));
    let n_terminal = rng.random_range(1..=(n_states - 1).min(2));
    random_elp(rng, n_states, n_actions, n_terminal)
}

/// A random non-terminating MDP with dense stochastic rows.
pub fn random_discounted_mdp<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize) -> DiscountedMdp {
    let all: Vec<usize> = (0..n_states).collect();
    let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        let support: Vec<usize> = all.iter().copied().filter(|_| rng.random_bool(0.6)).collect();
        let support = if support.is_empty() {
            vec![rng.random_range(0..n_states)]
        } else {
            support
        };
        transition.extend(random_simplex(rng, &support, n_states));
    }
    DiscountedMdp {
        n_states,
        n_actions,
        transition,
        reward: (0..n_states).map(|_| rng.random::<f64>() * 2.0 - 0.5).collect(),
        initial: random_simplex(rng, &all, n_states),
    }
}
