use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::demos::DemoSet;
use super::features::Featurizer;
use super::{SeqElp, SeqState, SeqTaskSpec};
use crate::error::{Error, Result};
use crate::lamin::QModel;

/// Per-action scores at a non-terminal state; decoding maximizes their sum.
pub trait ActionScorer {
    fn scores(&self, state: &SeqState) -> Vec<f64>;
}

/// Q-values of a model over featurized states.
#[derive(Debug, Clone)]
pub struct ModelScorer<'a, M: ?Sized, F> {
    model: &'a M,
    featurizer: F,
}

impl<'a, M: QModel + ?Sized, F: Featurizer> ModelScorer<'a, M, F> {
    pub fn new(model: &'a M, featurizer: F) -> Self {
        ModelScorer { model, featurizer }
    }
}

impl<M: QModel + ?Sized, F: Featurizer> ActionScorer for ModelScorer<'_, M, F> {
    fn scores(&self, state: &SeqState) -> Vec<f64> {
        self.model.q_values(&self.featurizer.features(state))
    }
}

/// Score 1 on the expert's action, 0 elsewhere.
#[derive(Debug, Clone)]
pub struct ExpertScorer {
    env: SeqElp,
}

impl ExpertScorer {
    pub fn new(spec: &SeqTaskSpec) -> Result<Self> {
        Ok(ExpertScorer {
            env: SeqElp::new(spec.clone())?,
        })
    }
}

impl ActionScorer for ExpertScorer {
    fn scores(&self, state: &SeqState) -> Vec<f64> {
        let mut s = vec![0.0; self.env.spec().n_actions()];
        s[self.env.expert_action(state)] = 1.0;
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Greedy,
    Beam(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    /// Written tokens, without eos.
    pub tokens: Vec<usize>,
    /// Sum of the scores of the chosen actions.
    pub score: f64,
}

/// Greedy takes the first maximizing action at every step. Beam search keeps the
/// `width` best partial outputs by summed score (finished ones compete unchanged)
/// and returns the best once all have finished; ties keep earlier hypotheses.
pub fn decode<S: ActionScorer + ?Sized>(
    scorer: &S,
    spec: &SeqTaskSpec,
    source: &[usize],
    mode: DecodeMode,
) -> Result<Decoded> {
    let env = SeqElp::new(spec.clone())?;
    let width = match mode {
        DecodeMode::Greedy => 1,
        DecodeMode::Beam(0) => return Err(Error::arg("beam width must be positive")),
        DecodeMode::Beam(w) => w,
    };
    let mut beam = vec![(SeqState::initial(source.to_vec()), 0.0)];
    while beam.iter().any(|(s, _)| !s.done) {
        let mut next = Vec::with_capacity(beam.len() * spec.n_actions());
        for (s, score) in beam {
            if s.done {
                next.push((s, score));
                continue;
            }
            let q = scorer.scores(&s);
            if width == 1 {
                let best = first_argmax(&q);
                next.push((env.advance(&s, best), score + q[best]));
                continue;
            }
            for (a, qa) in q.iter().enumerate() {
                next.push((env.advance(&s, a), score + qa));
            }
        }
        next.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal));
        next.truncate(width);
        beam = next;
    }
    let (state, score) = beam.swap_remove(0);
    Ok(Decoded {
        tokens: state.partial,
        score,
    })
}

fn first_argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (a, &v) in q.iter().enumerate() {
        if v > q[best] {
            best = a;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub source: String,
    pub reference: String,
    pub hypothesis: String,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_reward: f64,
    pub exact_match_rate: f64,
    pub rows: Vec<ReportRow>,
}

/// Decodes every held-out source and scores it against its reference.
pub fn evaluate_model<S: ActionScorer + ?Sized>(
    scorer: &S,
    spec: &SeqTaskSpec,
    heldout: &DemoSet,
    mode: DecodeMode,
) -> Result<EvalReport> {
    if heldout.is_empty() {
        return Err(Error::arg("held-out set is empty"));
    }
    let mut rows = Vec::with_capacity(heldout.len());
    let (mut total, mut exact) = (0.0, 0usize);
    for (src, reference) in &heldout.pairs {
        let hyp = decode(scorer, spec, src, mode)?.tokens;
        let reward = spec.metric.score(reference, &hyp);
        total += reward;
        exact += usize::from(hyp == *reference);
        rows.push(ReportRow {
            source: spec.render_source(src),
            reference: spec.render_target(reference),
            hypothesis: spec.render_target(&hyp),
            reward,
        });
    }
    let n = heldout.len() as f64;
    Ok(EvalReport {
        mean_reward: total / n,
        exact_match_rate: exact as f64 / n,
        rows,
    })
}
