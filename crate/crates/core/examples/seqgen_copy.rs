//! Trains an MLP Q-model on the copy task with LAMIN1, LAMIN2 and behavior
//! cloning, then reports held-out exact match for each.
//!
//! cargo run --release --example seqgen_copy -- [max_updates] [hidden]

use qlagrange::lamin::{train, Algorithm, EvalOutcome, MlpQModel, TrainConfig};
use qlagrange::seqgen::{
    evaluate_model, generate_demos, DecodeMode, Featurizer, ModelScorer, SeqDemoSource, SeqTaskSpec, StandardFeatures,
    Transform,
};

fn main() -> qlagrange::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let max_updates: usize = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(50_000);
    let hidden: usize = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(64);

    let spec = SeqTaskSpec::new(5, Transform::Copy, (3, 6), 8)?;
    let train_set = generate_demos(&spec, 4_000, 1)?;
    let heldout = generate_demos(&spec, 500, 2)?.without_sources_in(&train_set);
    println!("{} training pairs, {} held-out pairs", train_set.len(), heldout.len());

    for (algorithm, beta) in [
        (Algorithm::Lamin1, 0.01),
        (Algorithm::Lamin2, 1.0),
        (Algorithm::BehaviorCloning, 1.0),
    ] {
        let feats = StandardFeatures::new(&spec);
        let mut model = MlpQModel::new(feats.dim(), hidden, spec.n_actions(), 7);
        let mut source = SeqDemoSource::new(&spec, &train_set, feats.clone())?;
        let cfg = TrainConfig {
            n_updates: max_updates,
            eval_every: 1_000,
            seed: 3,
            ..TrainConfig::mlp(algorithm, beta)
        };
        let record = train(&mut model, &mut source, &cfg, |m, update| {
            let report = evaluate_model(&ModelScorer::new(m, feats.clone()), &spec, &heldout, DecodeMode::Greedy)?;
            println!(
                "{algorithm:?} update {update}: exact match {:.3}",
                report.exact_match_rate
            );
            Ok(EvalOutcome {
                eval_j: report.exact_match_rate,
                stop: report.exact_match_rate >= 0.99,
            })
        })?;
        println!(
            "{algorithm:?}: {} updates, held-out exact match {:.3}",
            record.entries.len(),
            record.final_eval().unwrap_or(0.0)
        );
    }
    Ok(())
}
