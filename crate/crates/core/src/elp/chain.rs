use crate::bellman::on_policy_value;
use crate::error::{Error, Result};
use crate::linalg;

use super::{rollout, EpisodicProcess, Estimate, Mode, Policy};

/// `P_pi(s'|s) = sum_a P(s'|s,a) pi(a|s)`, row-major `[s][s']`.
pub fn induced_chain(process: &EpisodicProcess, pi: &Policy) -> Result<Vec<f64>> {
    process.check_policy(pi)?;
    let n = process.n_states();
    let mut chain = vec![0.0; n * n];
    for s in 0..n {
        let out = &mut chain[s * n..(s + 1) * n];
        for (a, &p) in pi.row(s).iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (o, &q) in out.iter_mut().zip(process.row(s, a)) {
                *o += p * q;
            }
        }
    }
    Ok(chain)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub rho_pi: Vec<f64>,
    /// Mean episode length `E_pi[T]`.
    pub expected_t: f64,
}

impl StationaryDistribution {
    /// Stationary mass on terminal states; equals `1 / E_pi[T]`.
    pub fn terminal_mass(&self, process: &EpisodicProcess) -> f64 {
        process.terminal_states().map(|s| self.rho_pi[s]).sum()
    }
}

/// Solves `rho P_pi = rho, sum rho = 1` directly; periodic chains are fine.
pub fn stationary_distribution(process: &EpisodicProcess, pi: &Policy) -> Result<StationaryDistribution> {
    let n = process.n_states();
    let chain = induced_chain(process, pi)?;
    // rows of (P^T - I); the last one is replaced by the normalization constraint
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = chain[j * n + i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1) * n + j] = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let mut rho = linalg::solve(n, a, b, "solving for the stationary distribution")?;
    // clip solver noise on transient states
    for r in rho.iter_mut() {
        if r.abs() < 1e-15 {
            *r = 0.0;
        }
    }
    let term: f64 = process.terminal_states().map(|s| rho[s]).sum();
    if !(term > 0.0) {
        return Err(Error::Singular(
            "stationary distribution puts no mass on terminal states",
        ));
    }
    Ok(StationaryDistribution {
        rho_pi: rho,
        expected_t: 1.0 / term,
    })
}

/// Expected per-episode sum `E_pi[sum_{t=1}^T f(S_t)]` by a first-passage solve.
pub fn expected_episode_sum(process: &EpisodicProcess, pi: &Policy, f: &[f64]) -> Result<f64> {
    let n = process.n_states();
    if f.len() != n {
        return Err(Error::dim("state function length"));
    }
    let chain = induced_chain(process, pi)?;
    // u(s) = f(s) + 1{s not terminal} sum_s' P_pi(s'|s) u(s')
    let mut a = vec![0.0; n * n];
    for s in 0..n {
        a[s * n + s] = 1.0;
        if !process.is_terminal(s) {
            for t in 0..n {
                a[s * n + t] -= chain[s * n + t];
            }
        }
    }
    let u = linalg::solve(n, a, f.to_vec(), "solving for expected episode sums")?;
    Ok(process.reset_dist().iter().zip(&u).map(|(r, v)| r * v).sum())
}

/// Expected total episode reward `J(pi)`.
///
/// The exact mode reads the on-policy value at the (terminal) start state,
/// which is shared by every terminal state-action pair.
pub fn performance_j(process: &EpisodicProcess, pi: &Policy, mode: Mode) -> Result<Estimate> {
    process.check_policy(pi)?;
    match mode {
        Mode::Exact => {
            let q = on_policy_value(process, pi)?;
            Ok(Estimate::exact(q.get(process.start_state(), 0)))
        }
        Mode::MonteCarlo { seed, n_episodes } => {
            let traj = rollout(process, pi, seed, n_episodes)?;
            let returns: Vec<f64> = traj.episodes().map(|ep| ep.iter().map(|st| st.reward).sum()).collect();
            Ok(mean_and_se(&returns))
        }
    }
}

pub(crate) fn mean_and_se(xs: &[f64]) -> Estimate {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Estimate {
        value: mean,
        std_err: (var / n as f64).sqrt(),
        n,
    }
}

/// Both sides of `E_{rho_pi}[f] = E_pi[sum_{t<=T} f(S_t)] / E_pi[T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicSides {
    pub lhs: f64,
    pub rhs: f64,
}

/// Evaluates the state-space average (via the stationary distribution) and the
/// trajectory-space average (via first-passage solves) independently.
pub fn ergodic_transform(process: &EpisodicProcess, pi: &Policy, f: &[f64]) -> Result<ErgodicSides> {
    if f.len() != process.n_states() {
        return Err(Error::dim("state function length"));
    }
    let st = stationary_distribution(process, pi)?;
    let lhs = st.rho_pi.iter().zip(f).map(|(r, v)| r * v).sum();
    let sum_f = expected_episode_sum(process, pi, f)?;
    let mean_t = expected_episode_sum(process, pi, &vec![1.0; f.len()])?;
    Ok(ErgodicSides {
        lhs,
        rhs: sum_f / mean_t,
    })
}

/// Monte-Carlo ratio estimate of the trajectory side, with a delta-method
/// standard error.
pub fn ergodic_transform_mc(
    process: &EpisodicProcess,
    pi: &Policy,
    f: &[f64],
    seed: u64,
    n_episodes: usize,
) -> Result<Estimate> {
    if f.len() != process.n_states() {
        return Err(Error::dim("state function length"));
    }
    let traj = rollout(process, pi, seed, n_episodes)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = traj
        .episodes()
        .map(|ep| (ep.iter().map(|st| f[st.state]).sum::<f64>(), ep.len() as f64))
        .unzip();
    let n = xs.len() as f64;
    let mean_y = ys.iter().sum::<f64>() / n;
    let ratio = xs.iter().sum::<f64>() / ys.iter().sum::<f64>();
    let resid = xs.iter().zip(&ys).map(|(x, y)| (x - ratio * y).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(Estimate {
        value: ratio,
        std_err: (resid / n).sqrt() / mean_y,
        n: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::fig3_elp;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn fig3_action2_chain_cycles() {
        let p = fig3_elp();
        let pi = Policy::constant(6, 3, 1).unwrap();
        let c = induced_chain(&p, &pi).unwrap();
        assert_eq!(c[0 * 6 + 2], 1.0);
        assert_eq!(c[2 * 6 + 5], 1.0);
        assert_eq!(c[5 * 6 + 0], 1.0);
    }

    #[test]
    fn fig3_uniform_chain_splits_state0() {
        let p = fig3_elp();
        let c = induced_chain(&p, &Policy::uniform(6, 3)).unwrap();
        for t in 1..=3 {
            assert!(close(c[t], 1.0 / 3.0, 1e-15));
        }
        for s in 0..6 {
            assert!(close(c[s * 6..(s + 1) * 6].iter().sum::<f64>(), 1.0, 1e-12));
        }
    }

    #[test]
    fn single_state_self_loop_chain() {
        let p = EpisodicProcess::builder(1, 2)
            .terminal(0)
            .reset(vec![1.0])
            .build()
            .unwrap();
        assert_eq!(induced_chain(&p, &Policy::uniform(1, 2)).unwrap(), vec![1.0]);
        let st = stationary_distribution(&p, &Policy::uniform(1, 2)).unwrap();
        assert_eq!(st.rho_pi, vec![1.0]);
        assert!(close(st.expected_t, 1.0, 1e-12));
    }

    #[test]
    fn fig3_stationary_action2() {
        let p = fig3_elp();
        let st = stationary_distribution(&p, &Policy::constant(6, 3, 1).unwrap()).unwrap();
        for (s, want) in [
            (0, 1.0 / 3.0),
            (1, 0.0),
            (2, 1.0 / 3.0),
            (3, 0.0),
            (4, 0.0),
            (5, 1.0 / 3.0),
        ] {
            assert!(close(st.rho_pi[s], want, 1e-12), "state {s}");
        }
        assert!(close(st.expected_t, 3.0, 1e-12));
    }

    #[test]
    fn fig3_stationary_uniform() {
        let p = fig3_elp();
        let st = stationary_distribution(&p, &Policy::uniform(6, 3)).unwrap();
        assert!(close(st.expected_t, 3.0, 1e-12));
        assert!(close(st.rho_pi[0], 1.0 / 3.0, 1e-12));
        assert!(close(st.rho_pi[1] + st.rho_pi[2] + st.rho_pi[3], 1.0 / 3.0, 1e-12));
        assert!(close(st.rho_pi[4] + st.rho_pi[5], 1.0 / 3.0, 1e-12));
    }

    #[test]
    fn fig3_performance() {
        let p = fig3_elp();
        let j = |pi: &Policy| performance_j(&p, pi, Mode::Exact).unwrap().value;
        assert!(close(j(&Policy::constant(6, 3, 1).unwrap()), 2.0, 1e-12));
        assert!(close(j(&Policy::constant(6, 3, 0).unwrap()), 1.0, 1e-12));
        assert!(close(j(&Policy::uniform(6, 3)), 5.0 / 3.0, 1e-12));
    }

    #[test]
    fn fig3_ergodic_examples() {
        let p = fig3_elp();
        let pi = Policy::constant(6, 3, 1).unwrap();
        let r = p.rewards().to_vec();
        let sides = ergodic_transform(&p, &pi, &r).unwrap();
        assert!(close(sides.lhs, 2.0 / 3.0, 1e-12) && close(sides.rhs, 2.0 / 3.0, 1e-12));
        let ones = ergodic_transform(&p, &pi, &[1.0; 6]).unwrap();
        assert!(close(ones.lhs, 1.0, 1e-12) && close(ones.rhs, 1.0, 1e-12));
        let term: Vec<f64> = (0..6).map(|s| if p.is_terminal(s) { 1.0 } else { 0.0 }).collect();
        let t = ergodic_transform(&p, &Policy::uniform(6, 3), &term).unwrap();
        assert!(close(t.lhs, 1.0 / 3.0, 1e-12) && close(t.rhs, 1.0 / 3.0, 1e-12));
    }

    #[test]
    fn monte_carlo_j_is_near_exact() {
        let p = fig3_elp();
        let pi = Policy::uniform(6, 3);
        let est = performance_j(
            &p,
            &pi,
            Mode::MonteCarlo {
                seed: 11,
                n_episodes: 4000,
            },
        )
        .unwrap();
        assert_eq!(est.n, 4000);
        assert!(est.within_std_errs(5.0 / 3.0, 4.0), "{est:?}");
    }
}
