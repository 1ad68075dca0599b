//! Solves the six-state fixture by value iteration, prints Q*, the greedy
//! policy and its stationary distribution, then shows the trapped-set check.
//!
//! cargo run --example fig3_bellman

use qlagrange::bellman::{greedy_policy, on_policy_value, value_iteration, DiscountFn, TabularQ, TieBreak};
use qlagrange::elp::{performance_j, stationary_distribution, Mode};
use qlagrange::lagrangian::fig3_elp;

fn main() -> qlagrange::Result<()> {
    let p = fig3_elp();
    let vi = value_iteration(&p, &DiscountFn::episodic(&p), &TabularQ::zeros(6, 3), 1e-12, 10_000)?;
    println!("value iteration: {} sweeps, residual {:e}", vi.iterations, vi.residual);
    print_table("Q*", &p, &vi.q);

    let greedy = greedy_policy(&vi.q, TieBreak::FirstIndex);
    println!("J(greedy Q*) = {}", performance_j(&p, &greedy, Mode::Exact)?.value);
    let st = stationary_distribution(&p, &greedy)?;
    println!("stationary distribution {:.4?}, E[T] = {}", st.rho_pi, st.expected_t);
    print_table("Q of the greedy policy", &p, &on_policy_value(&p, &greedy)?);

    // with action "1" at state 3 looping back, a policy can avoid the terminals forever from 0 and 3
    let trapped = p.with_row(3, 0, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0])?;
    println!("after making state 3 absorbing under action 1:\n{}", trapped.validate());
    Ok(())
}

fn print_table(title: &str, p: &qlagrange::elp::EpisodicProcess, q: &TabularQ) {
    println!("{title}:");
    for s in 0..p.n_states() {
        let row: Vec<String> = q.row(s).iter().map(|v| format!("{v:7.4}")).collect();
        println!("  state {} | {}", p.state_names()[s], row.join(" "));
    }
}
