//! Checks the state-space and trajectory-space averages on random processes,
//! then recasts a discounted MDP as an episodic one and compares returns.
//!
//! cargo run --release --example ergodic_and_discounted

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qlagrange::elp::random::{random_discounted_mdp, random_small_elp};
use qlagrange::elp::{
    discounted_to_elp, ergodic_transform, ergodic_transform_mc, performance_j, stationary_distribution, Mode, Policy,
};

fn main() -> qlagrange::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..5 {
        let p = random_small_elp(&mut rng, 8, 4);
        let pi = Policy::random(p.n_states(), p.n_actions(), &mut rng);
        let f: Vec<f64> = (0..p.n_states()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sides = ergodic_transform(&p, &pi, &f)?;
        let mc = ergodic_transform_mc(&p, &pi, &f, i, 20_000)?;
        println!(
            "process {i}: states {}, rho-average {:.6}, episode ratio {:.6}, Monte-Carlo {:.4} +- {:.4}",
            p.n_states(),
            sides.lhs,
            sides.rhs,
            mc.value,
            mc.std_err
        );
    }

    let mdp = random_discounted_mdp(&mut rng, 4, 2);
    let pi = Policy::random(4, 2, &mut rng);
    for gamma_c in [0.5, 0.9, 0.99] {
        let elp = discounted_to_elp(&mdp, gamma_c)?;
        let lifted = mdp.lift_policy(&pi)?;
        let st = stationary_distribution(&elp, &lifted)?;
        let j = performance_j(&elp, &lifted, Mode::Exact)?.value;
        println!(
            "gamma {gamma_c}: E[T] = {:.4} (gamma/(1-gamma) + 2 = {:.4}), J = {j:.6}, discounted return = {:.6}",
            st.expected_t,
            gamma_c / (1.0 - gamma_c) + 2.0,
            discounted_return(&mdp, &pi, gamma_c)
        );
    }
    Ok(())
}

/// `sum_t gamma^(t-1) E[R(S_t)]` by propagating the state distribution.
fn discounted_return(mdp: &qlagrange::elp::DiscountedMdp, pi: &Policy, gamma: f64) -> f64 {
    let n = mdp.n_states;
    let mut dist = mdp.initial.clone();
    let (mut total, mut weight) = (0.0, 1.0);
    while weight > 1e-15 {
        total += weight * dist.iter().zip(&mdp.reward).map(|(d, r)| d * r).sum::<f64>();
        let mut next = vec![0.0; n];
        for s in 0..n {
            for a in 0..mdp.n_actions {
                let w = dist[s] * pi.prob(s, a);
                for (t, p) in mdp.row(s, a).iter().enumerate() {
                    next[t] += w * p;
                }
            }
        }
        dist = next;
        weight *= gamma;
    }
    total
}
