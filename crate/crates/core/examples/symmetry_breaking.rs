//! Minimax and maximin points on the six-state fixture, and the V-form
//! counterexample where an LP-optimal V leaves the initial choice tied.
//!
//! cargo run --example symmetry_breaking

use qlagrange::bellman::{greedy_policy, TabularQ, TieBreak};
use qlagrange::elp::{performance_j, Mode, Policy};
use qlagrange::lagrangian::{
    fig3_elp, fig3_q_const, fig3_q_max, fig3_q_star, is_maximin_q, is_minimax_q, vform_counterexample,
};

fn main() -> qlagrange::Result<()> {
    let p = fig3_elp();
    let mu = Policy::uniform(6, 3);
    println!(
        "{:<12} {:>8} {:>8} {:>14} {:>12}",
        "Q", "minimax", "maximin", "J first-index", "J uniform"
    );
    for (name, q) in [
        ("Q*", fig3_q_star()),
        ("constant 2", fig3_q_const()),
        ("Q_max", fig3_q_max()),
    ] {
        let j = |tie| -> qlagrange::Result<f64> { Ok(performance_j(&p, &greedy_policy(&q, tie), Mode::Exact)?.value) };
        println!(
            "{name:<12} {:>8} {:>8} {:>14.4} {:>12.4}",
            is_minimax_q(&p, &mu, &q, 1e-8)?,
            is_maximin_q(&p, &mu, &q, 1e-8)?,
            j(TieBreak::FirstIndex)?,
            j(TieBreak::Uniform)?,
        );
    }
    show_ties(&fig3_q_const());

    let vf = vform_counterexample();
    println!("\nV-form: V_min = {:?}, V* = {:?}", vf.v_min, vf.v_star);
    println!(
        "LP feasible {}, optimal {}, backups at the initial state {:?} (tie: {})",
        vf.lp_check.feasible, vf.lp_check.attains_optimum, vf.lp_check.backups_at_initial, vf.lp_check.backups_tie
    );
    Ok(())
}

fn show_ties(q: &TabularQ) {
    let pi = greedy_policy(q, TieBreak::Uniform);
    println!("uniform greedy of constant 2 at state 0: {:?}", pi.row(0));
}
