//! Compares the minimax value of the Lagrangian with J(mu) on random processes,
//! for optimal and for random demonstrators.
//!
//! cargo run --release --example strong_duality -- [n_processes]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qlagrange::bellman::{greedy_policy, solve_q_star, TieBreak};
use qlagrange::elp::random::random_small_elp;
use qlagrange::elp::{Mode, Policy};
use qlagrange::lagrangian::{canonical_multiplier, dual_form_value, lagrangian_value, verify_strong_duality};

fn main() -> qlagrange::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut worst_opt, mut worst_rand, mut lemma) = (0f64, 0f64, 0f64);
    let mut suboptimal = 0;
    for _ in 0..n {
        let p = random_small_elp(&mut rng, 8, 4);
        let q_star = solve_q_star(&p)?;
        let mu = greedy_policy(&q_star, TieBreak::FirstIndex);
        let r = verify_strong_duality(&p, &mu, 1e-8)?;
        worst_opt = worst_opt.max((r.minimax_value - r.j_mu).abs());

        let random = Policy::random(p.n_states(), p.n_actions(), &mut rng);
        let r = verify_strong_duality(&p, &random, 1e-8)?;
        worst_rand = worst_rand.max(r.minimax_value - r.j_mu);
        suboptimal += r.mu_suboptimal as usize;

        // the Lagrangian at the canonical multiplier collapses to its dual form
        let lam = canonical_multiplier(&p, &random)?;
        let l = lagrangian_value(&p, &random, &q_star, &lam, Mode::Exact)?.value;
        lemma = lemma.max((l - dual_form_value(&p, &random, &q_star)?).abs());
    }
    println!("{n} processes");
    println!("optimal demonstrator: max |minimax - J(mu)| = {worst_opt:e}");
    println!("random demonstrator: max minimax - J(mu) = {worst_rand:.4} ({suboptimal} flagged suboptimal)");
    println!("max |L(Q*, lambda_mu) - dual form| = {lemma:e}");
    Ok(())
}
