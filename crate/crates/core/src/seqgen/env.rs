use std::collections::{HashMap, VecDeque};

use rand::Rng;

use super::SeqTaskSpec;
use crate::elp::EpisodicProcess;
use crate::error::{Error, Result};

/// Largest state count for which the process may be materialized as a table.
pub const TABULAR_STATE_LIMIT: usize = 10_000;

/// Source sentence, tokens written so far (without bos/eos), and whether the
/// output has been closed by eos.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SeqState {
    pub source: Vec<usize>,
    pub partial: Vec<usize>,
    pub done: bool,
}

impl SeqState {
    /// Terminal placeholder the process starts from before the first sentence.
    pub fn sentinel() -> Self {
        SeqState {
            source: Vec::new(),
            partial: Vec::new(),
            done: true,
        }
    }

    pub fn initial(source: Vec<usize>) -> Self {
        SeqState {
            source,
            partial: Vec::new(),
            done: false,
        }
    }
}

/// The sequence-generation ELP, with states built on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqElp {
    spec: SeqTaskSpec,
}

impl SeqElp {
    pub fn new(spec: SeqTaskSpec) -> Result<Self> {
        spec.validate()?;
        Ok(SeqElp { spec })
    }

    pub fn spec(&self) -> &SeqTaskSpec {
        &self.spec
    }

    pub fn start_state(&self) -> SeqState {
        SeqState::sentinel()
    }

    /// Draws a length uniformly from the configured range, then symbols uniformly.
    pub fn sample_source<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let len = rng.random_range(self.spec.min_source_len..=self.spec.max_source_len);
        (0..len)
            .map(|_| rng.random_range(0..self.spec.source_vocab.len()))
            .collect()
    }

    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> SeqState {
        SeqState::initial(self.sample_source(rng))
    }

    /// Deterministic append for non-terminal states; terminal states reset.
    pub fn step<R: Rng + ?Sized>(&self, state: &SeqState, action: usize, rng: &mut R) -> SeqState {
        if state.done {
            self.reset(rng)
        } else {
            self.advance(state, action)
        }
    }

    /// The append transition of a non-terminal state. Writing the last allowed
    /// token closes the output.
    pub fn advance(&self, state: &SeqState, action: usize) -> SeqState {
        debug_assert!(!state.done);
        let mut next = state.clone();
        if action == self.spec.eos() {
            next.done = true;
        } else {
            next.partial.push(action);
            if next.partial.len() >= self.spec.max_len {
                next.done = true;
            }
        }
        next
    }

    /// Metric score at terminal states, zero elsewhere.
    pub fn reward(&self, state: &SeqState) -> f64 {
        if state.done && !state.source.is_empty() {
            self.spec.score(&state.source, &state.partial)
        } else {
            0.0
        }
    }

    pub fn expert_action(&self, state: &SeqState) -> usize {
        if state.done {
            return self.spec.terminal_action;
        }
        let target = self.spec.transform(&state.source);
        target.get(state.partial.len()).copied().unwrap_or(self.spec.eos())
    }

    /// All states reachable after a reset from `source`, for a fixed source.
    fn states_for(&self, source: &[usize]) -> Vec<SeqState> {
        let mut out = Vec::new();
        let mut queue = VecDeque::from([SeqState::initial(source.to_vec())]);
        while let Some(s) = queue.pop_front() {
            if !s.done {
                for a in 0..self.spec.n_actions() {
                    queue.push_back(self.advance(&s, a));
                }
            }
            out.push(s);
        }
        out
    }

    /// Every source the reset distribution can draw, with its probability.
    pub fn source_distribution(&self) -> Vec<(Vec<usize>, f64)> {
        let v = self.spec.source_vocab.len();
        let n_len = (self.spec.max_source_len - self.spec.min_source_len + 1) as f64;
        let mut out = Vec::new();
        for len in self.spec.min_source_len..=self.spec.max_source_len {
            let p = 1.0 / n_len / (v as f64).powi(len as i32);
            let mut idx = vec![0usize; len];
            loop {
                out.push((idx.clone(), p));
                // odometer increment
                let mut i = len;
                loop {
                    if i == 0 {
                        break;
                    }
                    i -= 1;
                    idx[i] += 1;
                    if idx[i] < v {
                        break;
                    }
                    idx[i] = 0;
                }
                if idx.iter().all(|&x| x == 0) {
                    break;
                }
            }
        }
        out
    }

    /// Number of states in the materialized table, computed without building it.
    pub fn state_count(&self) -> usize {
        let v = self.spec.target_vocab.len() as u128;
        let h = self.spec.max_len as u32;
        // partial prefixes of length < H, each open or closed by eos, plus closed length-H outputs
        let shorter: u128 = (0..h).map(|l| v.pow(l)).sum();
        let per_source = 2 * shorter + v.pow(h);
        let vs = self.spec.source_vocab.len() as u128;
        let sources: u128 = (self.spec.min_source_len..=self.spec.max_source_len)
            .map(|l| vs.pow(l as u32))
            .sum();
        (1 + sources * per_source).min(usize::MAX as u128) as usize
    }
}

/// Builds the full state table. The start sentinel is state 0; states follow in
/// breadth-first order per source, sources in reset order.
pub fn materialize(env: &SeqElp) -> Result<(EpisodicProcess, Vec<SeqState>)> {
    let count = env.state_count();
    if count > TABULAR_STATE_LIMIT {
        return Err(Error::Precondition(format!(
            "{count} states exceed the tabular limit of {TABULAR_STATE_LIMIT}"
        )));
    }
    let mut states = vec![SeqState::sentinel()];
    let sources = env.source_distribution();
    for (src, _) in &sources {
        states.extend(env.states_for(src));
    }
    let index: HashMap<&SeqState, usize> = states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let n = states.len();
    let m = env.spec.n_actions();
    let mut reset = vec![0.0; n];
    for (src, p) in &sources {
        reset[index[&SeqState::initial(src.clone())]] += p;
    }
    let mut builder = EpisodicProcess::builder(n, m).reset(reset).start(0);
    for (i, s) in states.iter().enumerate() {
        builder = builder.reward(i, env.reward(s));
        if s.done {
            builder = builder.terminal(i);
        } else {
            for a in 0..m {
                builder = builder.goto(i, a, index[&env.advance(s, a)]);
            }
        }
    }
    Ok((builder.build()?, states))
}
