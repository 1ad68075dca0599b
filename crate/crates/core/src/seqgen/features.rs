use std::collections::HashMap;

use super::{SeqState, SeqTaskSpec, Transform};

/// Source positions visible to the model, starting at the aligned reading position.
pub const SOURCE_WINDOW: usize = 4;

/// Maps sequence states to fixed-length model inputs.
pub trait Featurizer {
    fn dim(&self) -> usize;
    fn features(&self, state: &SeqState) -> Vec<f64>;
}

/// Layout, in order:
/// - `SOURCE_WINDOW` one-hot blocks of size `|V_src|`: the source symbols the
///   transform reads next, from the current output position onward (backward
///   from the end for `reverse`); out-of-range positions are all zero;
/// - two one-hot blocks of size `|V_tgt| + 2` for the last and second-to-last
///   written symbols, with bos and eos after the vocabulary;
/// - the output position divided by `max_len`;
/// - the done flag.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardFeatures {
    spec: SeqTaskSpec,
}

impl StandardFeatures {
    pub fn new(spec: &SeqTaskSpec) -> Self {
        StandardFeatures { spec: spec.clone() }
    }
}

impl Featurizer for StandardFeatures {
    fn dim(&self) -> usize {
        SOURCE_WINDOW * self.spec.source_vocab.len() + 2 * (self.spec.target_vocab.len() + 2) + 2
    }

    fn features(&self, state: &SeqState) -> Vec<f64> {
        let vs = self.spec.source_vocab.len();
        let vt = self.spec.target_vocab.len();
        let mut x = vec![0.0; self.dim()];
        let t = state.partial.len() as isize;
        let len = state.source.len() as isize;
        for i in 0..SOURCE_WINDOW as isize {
            let pos = match self.spec.transform {
                Transform::Reverse => len - 1 - t - i,
                _ => t + i,
            };
            if (0..len).contains(&pos) {
                x[i as usize * vs + state.source[pos as usize]] = 1.0;
            }
        }
        // written symbols, bos first
        let mut written: Vec<usize> = Vec::with_capacity(state.partial.len() + 2);
        written.push(vt);
        written.extend(&state.partial);
        if state.done {
            written.push(vt + 1);
        }
        let off = SOURCE_WINDOW * vs;
        for (slot, sym) in written.iter().rev().take(2).enumerate() {
            x[off + slot * (vt + 2) + sym] = 1.0;
        }
        let n = x.len();
        x[n - 2] = state.partial.len() as f64 / self.spec.max_len as f64;
        x[n - 1] = if state.done { 1.0 } else { 0.0 };
        x
    }
}

/// One-hot over an explicit state list, for tabular models on small tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexFeatures {
    index: HashMap<SeqState, usize>,
}

impl IndexFeatures {
    pub fn new(states: &[SeqState]) -> Self {
        IndexFeatures {
            index: states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect(),
        }
    }

    pub fn index_of(&self, state: &SeqState) -> Option<usize> {
        self.index.get(state).copied()
    }
}

impl Featurizer for IndexFeatures {
    fn dim(&self) -> usize {
        self.index.len()
    }

    /// Panics on a state outside the list.
    fn features(&self, state: &SeqState) -> Vec<f64> {
        let mut x = vec![0.0; self.index.len()];
        x[self.index[state]] = 1.0;
        x
    }
}
