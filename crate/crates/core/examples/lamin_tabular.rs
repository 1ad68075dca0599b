//! Learns a tabular Q from demonstrations of the optimal policy on the
//! six-state fixture with LAMIN1, LAMIN2 and behavior cloning.
//!
//! cargo run --release --example lamin_tabular -- [n_updates]

use qlagrange::bellman::{greedy_policy, solve_q_star, TieBreak};
use qlagrange::elp::{performance_j, Mode};
use qlagrange::lagrangian::fig3_elp;
use qlagrange::lamin::{
    model_greedy_policy, model_q_table, one_hot_table, train, Algorithm, ElpDemoSource, EvalOutcome, TabularQModel,
    TrainConfig,
};

fn main() -> qlagrange::Result<()> {
    let n_updates: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5_000);
    let p = fig3_elp();
    let expert = greedy_policy(&solve_q_star(&p)?, TieBreak::FirstIndex);
    let feats = one_hot_table(6);

    for (algorithm, beta) in [
        (Algorithm::Lamin1, 0.5),
        (Algorithm::Lamin2, 0.5),
        (Algorithm::BehaviorCloning, 1.0),
    ] {
        let mut model = TabularQModel::zeros(6, 3);
        let mut source = ElpDemoSource::new(&p, &expert, feats.clone())?;
        let cfg = TrainConfig {
            n_updates,
            eval_every: n_updates / 5,
            ..TrainConfig::tabular(algorithm, beta)
        };
        let record = train(&mut model, &mut source, &cfg, |m, _| {
            let pi = model_greedy_policy(m, &feats, TieBreak::FirstIndex);
            Ok(EvalOutcome {
                eval_j: performance_j(&p, &pi, Mode::Exact)?.value,
                stop: false,
            })
        })?;
        let curve: Vec<String> = record.curve().iter().map(|(u, j)| format!("{u}:{j:.3}")).collect();
        println!("{algorithm:?} beta {beta}: J curve {}", curve.join(" "));
        let q = model_q_table(&model, &feats);
        println!("  learned Q at state 0: {:.3?}", q.row(0));
    }
    Ok(())
}
