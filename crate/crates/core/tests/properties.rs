//! Invariants over random processes, policies and Q-tables.

mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qlagrange::bellman::{
    apply_bellman, greedy_policy, monotonicity_check, on_policy_value, solve_q_star, value_iteration, DiscountFn,
    TabularQ, TieBreak,
};
use qlagrange::elp::random::random_small_elp;
use qlagrange::elp::{induced_chain, performance_j, rollout, stationary_distribution, EpisodicProcess, Mode, Policy};
use qlagrange::io::{elp_to_json, ElpDocument};
use qlagrange::lagrangian::{
    canonical_multiplier, dual_form_value, fig3_elp, fig3_q_const, is_maximin_q, lagrangian_value,
    maximin_optimality_check, terminal_expectation, verify_strong_duality, Multiplier,
};

use common::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_q(r: &mut ChaCha8Rng, p: &EpisodicProcess, scale: f64) -> TabularQ {
    let values = (0..p.n_states() * p.n_actions())
        .map(|_| scale * (2.0 * r.random::<f64>() - 1.0))
        .collect();
    TabularQ::new(p.n_states(), p.n_actions(), values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chain_rows_and_stationarity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_small_elp(&mut r, 8, 4);
        let pi = Policy::random(p.n_states(), p.n_actions(), &mut r);
        let n = p.n_states();
        let chain = induced_chain(&p, &pi).unwrap();
        for row in chain.chunks(n) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let st = stationary_distribution(&p, &pi).unwrap();
        for t in 0..n {
            let flow: f64 = (0..n).map(|s| st.rho_pi[s] * chain[s * n + t]).sum();
            prop_assert!((flow - st.rho_pi[t]).abs() < 1e-10);
        }
        prop_assert!((st.expected_t * st.terminal_mass(&p) - 1.0).abs() < 1e-10);
        prop_assert!((st.expected_t - expected_length(&p, &pi)).abs() < 1e-9);
    }

    #[test]
    fn json_round_trip(seed in any::<u64>()) {
        let p = random_small_elp(&mut rng(seed), 8, 4);
        let text = elp_to_json(&p);
        let doc: ElpDocument = serde_json::from_str(&text).unwrap();
        let back = doc.to_process(std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(elp_to_json(&back), text);
    }

    #[test]
    fn bellman_is_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_small_elp(&mut r, 6, 3);
        let q1 = random_q(&mut r, &p, 3.0);
        let bump: Vec<f64> = q1.values().iter().map(|v| v + r.random::<f64>()).collect();
        let q2 = TabularQ::new(p.n_states(), p.n_actions(), bump).unwrap();
        prop_assert!(monotonicity_check(&p, &DiscountFn::episodic(&p), &q2, &q1).unwrap());
    }

    #[test]
    fn on_policy_values_are_maximin_feasible(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_small_elp(&mut r, 8, 4);
        let pi = Policy::random(p.n_states(), p.n_actions(), &mut r);
        let q = on_policy_value(&p, &pi).unwrap();
        let bq = apply_bellman(&p, &DiscountFn::episodic(&p), &q).unwrap();
        prop_assert!(bq.dominates(&q, 1e-10));
        let j = policy_j(&p, &pi);
        for s in p.terminal_states() {
            for a in 0..p.n_actions() {
                prop_assert!((q.get(s, a) - j).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lagrangian_at_canonical_multiplier_is_dual_form(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_small_elp(&mut r, 8, 4);
        let pi = Policy::random(p.n_states(), p.n_actions(), &mut r);
        let q = random_q(&mut r, &p, 5.0);
        let lam = canonical_multiplier(&p, &pi).unwrap();
        let l = lagrangian_value(&p, &pi, &q, &lam, Mode::Exact).unwrap().value;
        prop_assert!((l - dual_form_value(&p, &pi, &q).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn weak_duality_at_q_star(seed in any::<u64>()) {
        // Q* >= BQ* holds with equality, so any lambda >= 0 gives L(Q*, lambda) = E[Q*(S_T, A_T)].
        let mut r = rng(seed);
        let p = random_small_elp(&mut r, 8, 4);
        let pi = Policy::random(p.n_states(), p.n_actions(), &mut r);
        let q_star = solve_q_star(&p).unwrap();
        let w: Vec<f64> = (0..p.n_states() * p.n_actions()).map(|_| 10.0 * r.random::<f64>()).collect();
        let lam = Multiplier::new(p.n_states(), p.n_actions(), w).unwrap();
        let minimax = terminal_expectation(&p, &pi, &q_star, Mode::Exact).unwrap().value;
        let l = lagrangian_value(&p, &pi, &q_star, &lam, Mode::Exact).unwrap().value;
        prop_assert!(l <= minimax + 1e-8);
    }
}

#[test]
fn value_iteration_fixed_point_and_uniqueness() {
    let mut r = rng(1);
    for i in 0..100 {
        let p = random_small_elp(&mut r, 8, 4);
        let gamma = DiscountFn::episodic(&p);
        let vi = value_iteration(
            &p,
            &gamma,
            &TabularQ::zeros(p.n_states(), p.n_actions()),
            1e-10,
            100_000,
        )
        .unwrap();
        assert!(vi.converged);
        let bq = apply_bellman(&p, &gamma, &vi.q).unwrap();
        assert!(vi.q.sup_distance(&bq) < 1e-9);
        if i < 10 {
            for _ in 0..10 {
                let start = random_q(&mut r, &p, 50.0);
                let other = value_iteration(&p, &gamma, &start, 1e-10, 100_000).unwrap();
                assert!(other.q.sup_distance(&vi.q) < 1e-7);
            }
        }
    }
}

#[test]
fn greedy_q_star_is_optimal() {
    let mut r = rng(3);
    for _ in 0..100 {
        // at most 4^3 deterministic policies over the non-terminal states
        let n_actions = r.random_range(1..=4);
        let n_terminal = r.random_range(1..=2);
        let n_states = n_terminal + r.random_range(1..=3);
        let p = qlagrange::elp::random::random_elp(&mut r, n_states, n_actions, n_terminal);
        let q_star = solve_q_star(&p).unwrap();
        let best = enumerate_optimum(&p);
        for tie in [TieBreak::FirstIndex, TieBreak::Uniform] {
            let j = performance_j(&p, &greedy_policy(&q_star, tie), Mode::Exact)
                .unwrap()
                .value;
            assert!((j - best).abs() < 1e-8, "{j} vs {best}");
        }
        let (lib_best, _) = qlagrange::bellman::optimal_j_by_enumeration(&p).unwrap();
        assert!((lib_best - best).abs() < 1e-8);
    }
}

#[test]
fn strong_duality_on_random_processes() {
    let mut r = rng(4);
    for _ in 0..100 {
        let p = random_small_elp(&mut r, 8, 4);
        let mu = greedy_policy(&solve_q_star(&p).unwrap(), TieBreak::FirstIndex);
        assert!(verify_strong_duality(&p, &mu, 1e-8).unwrap().equal);
    }
}

#[test]
fn library_maximin_implies_optimal_greedy() {
    // perturb Q* downward and keep whatever the classifier accepts
    let mut r = rng(5);
    let mut accepted = 0;
    for _ in 0..50 {
        let p = random_small_elp(&mut r, 6, 3);
        let pi = Policy::uniform(p.n_states(), p.n_actions());
        let q_star = solve_q_star(&p).unwrap();
        for _ in 0..10 {
            let lowered: Vec<f64> = q_star
                .values()
                .iter()
                .map(|v| v - if r.random_bool(0.3) { r.random::<f64>() } else { 0.0 })
                .collect();
            let q = TabularQ::new(p.n_states(), p.n_actions(), lowered).unwrap();
            if is_maximin_q(&p, &pi, &q, 1e-8).unwrap() {
                accepted += 1;
                assert!(maximin_optimality_check(&p, &q, 1e-8).unwrap());
            }
        }
    }
    assert!(accepted > 0);
}

#[test]
fn canonical_multiplier_avoids_unvisited_state() {
    // with pi choosing action "2" at state 0, state 1 is never visited
    let p = fig3_elp();
    let pi = Policy::constant(6, 3, 1).unwrap();
    let lam = canonical_multiplier(&p, &pi).unwrap();
    assert!((0..3).all(|a| lam.get(1, a) == 0.0));
    let report = qlagrange::lagrangian::check_saddle(&p, &pi, &fig3_q_const(), 1e-8).unwrap();
    assert!(report.is_saddle());
}

#[test]
fn monte_carlo_lagrangian_agrees_with_exact() {
    let p = fig3_elp();
    let mut r = rng(6);
    let pi = Policy::random(6, 3, &mut r);
    let q = random_q(&mut r, &p, 2.0);
    let lam = canonical_multiplier(&p, &pi).unwrap();
    let exact = lagrangian_value(&p, &pi, &q, &lam, Mode::Exact).unwrap().value;
    let mut hits = 0;
    for seed in 0..10 {
        let est = lagrangian_value(
            &p,
            &pi,
            &q,
            &lam,
            Mode::MonteCarlo {
                seed,
                n_episodes: 5_000,
            },
        )
        .unwrap();
        if est.within_std_errs(exact, 4.0) {
            hits += 1;
        }
    }
    assert!(hits >= 9, "{hits}/10");
}

#[test]
fn monte_carlo_j_converges_on_fig3() {
    let p = fig3_elp();
    let pi = Policy::new(6, 3, [0.5, 0.3, 0.2].repeat(6)).unwrap();
    let exact = policy_j(&p, &pi);
    let mut hits = 0;
    for seed in 0..10 {
        let est = performance_j(
            &p,
            &pi,
            Mode::MonteCarlo {
                seed,
                n_episodes: 10_000,
            },
        )
        .unwrap();
        if est.within_std_errs(exact, 4.0) {
            hits += 1;
        }
    }
    assert!(hits >= 9, "{hits}/10");
}

#[test]
fn rollouts_are_deterministic() {
    let p = fig3_elp();
    let pi = Policy::uniform(6, 3);
    assert_eq!(rollout(&p, &pi, 11, 50).unwrap(), rollout(&p, &pi, 11, 50).unwrap());
}
