//! Toy sequence generation cast as an ELP: the agent writes a target sequence
//! one token at a time and receives a similarity reward when it stops.

mod decode;
mod demos;
mod env;
mod features;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use decode::{
    decode, evaluate_model, ActionScorer, DecodeMode, Decoded, EvalReport, ExpertScorer, ModelScorer, ReportRow,
};
pub use demos::{generate_demos, ingest_demos, parse_demos, write_demos, DemoSet, Provenance, SeqDemoSource};
pub use env::{materialize, SeqElp, SeqState, TABULAR_STATE_LIMIT};
pub use features::{Featurizer, IndexFeatures, StandardFeatures, SOURCE_WINDOW};

pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Copy,
    Reverse,
    /// Cyclic shift of every symbol index by `k` within the vocabulary.
    Shift(usize),
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "copy" => Ok(Transform::Copy),
            "reverse" => Ok(Transform::Reverse),
            _ => s
                .strip_prefix("shift")
                .map(|k| k.trim_matches(|c| c == '(' || c == ')' || c == ':' || c == '='))
                .and_then(|k| k.parse().ok())
                .map(Transform::Shift)
                .ok_or_else(|| Error::arg(format!("unknown transform `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    ExactMatch,
    TokenF1,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact_match" => Ok(Metric::ExactMatch),
            "token_f1" => Ok(Metric::TokenF1),
            _ => Err(Error::arg(format!("unknown metric `{s}`"))),
        }
    }
}

impl Metric {
    /// Similarity in `[0, 100]` between a reference and a hypothesis.
    pub fn score(&self, reference: &[usize], hypothesis: &[usize]) -> f64 {
        match self {
            Metric::ExactMatch => {
                if reference == hypothesis {
                    100.0
                } else {
                    0.0
                }
            }
            Metric::TokenF1 => {
                if reference.is_empty() && hypothesis.is_empty() {
                    return 100.0;
                }
                let mut pool = reference.to_vec();
                let mut common = 0usize;
                for t in hypothesis {
                    if let Some(i) = pool.iter().position(|r| r == t) {
                        pool.swap_remove(i);
                        common += 1;
                    }
                }
                if common == 0 {
                    return 0.0;
                }
                let p = common as f64 / hypothesis.len() as f64;
                let r = common as f64 / reference.len() as f64;
                100.0 * 2.0 * p * r / (p + r)
            }
        }
    }
}

/// A synthetic translation task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqTaskSpec {
    pub source_vocab: Vec<String>,
    pub target_vocab: Vec<String>,
    /// Maximum number of target tokens before a forced stop.
    pub max_len: usize,
    pub transform: Transform,
    pub metric: Metric,
    pub min_source_len: usize,
    pub max_source_len: usize,
    /// Action recorded for the expert at terminal states.
    pub terminal_action: usize,
}

impl SeqTaskSpec {
    /// Symbols `a, b, c, ...` shared by source and target.
    pub fn new(vocab_size: usize, transform: Transform, source_len: (usize, usize), max_len: usize) -> Result<Self> {
        if vocab_size == 0 || vocab_size > 26 {
            return Err(Error::arg("vocabulary size must be in 1..=26"));
        }
        let vocab: Vec<String> = (0..vocab_size)
            .map(|i| ((b'a' + i as u8) as char).to_string())
            .collect();
        let spec = SeqTaskSpec {
            source_vocab: vocab.clone(),
            target_vocab: vocab,
            max_len,
            transform,
            metric: Metric::ExactMatch,
            min_source_len: source_len.0,
            max_source_len: source_len.1,
            terminal_action: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.source_vocab.is_empty() || self.target_vocab.is_empty() {
            return Err(Error::arg("vocabularies must be nonempty"));
        }
        for v in [&self.source_vocab, &self.target_vocab] {
            if v.iter()
                .any(|s| s == BOS || s == EOS || s.is_empty() || s.contains(char::is_whitespace))
            {
                return Err(Error::arg(
                    "vocabulary symbols must be nonblank, without whitespace, and not reserved",
                ));
            }
            let mut sorted = v.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != v.len() {
                return Err(Error::arg("vocabulary has duplicate symbols"));
            }
        }
        if self.min_source_len == 0 || self.min_source_len > self.max_source_len {
            return Err(Error::arg("invalid source length range"));
        }
        if self.max_len < self.max_source_len {
            return Err(Error::arg(format!(
                "max_len {} is shorter than the longest target {}",
                self.max_len, self.max_source_len
            )));
        }
        if self.target_vocab.len() != self.source_vocab.len() {
            return Err(Error::arg(
                "transforms need equally sized source and target vocabularies",
            ));
        }
        if self.terminal_action >= self.n_actions() {
            return Err(Error::arg("terminal action out of range"));
        }
        Ok(())
    }

    /// Target tokens plus end-of-sequence.
    pub fn n_actions(&self) -> usize {
        self.target_vocab.len() + 1
    }

    pub fn eos(&self) -> usize {
        self.target_vocab.len()
    }

    pub fn transform(&self, source: &[usize]) -> Vec<usize> {
        let v = self.target_vocab.len();
        match self.transform {
            Transform::Copy => source.to_vec(),
            Transform::Reverse => source.iter().rev().copied().collect(),
            Transform::Shift(k) => source.iter().map(|&s| (s + k) % v).collect(),
        }
    }

    pub fn score(&self, source: &[usize], hypothesis: &[usize]) -> f64 {
        self.metric.score(&self.transform(source), hypothesis)
    }

    pub fn encode_source(&self, text: &str) -> Result<Vec<usize>> {
        encode(&self.source_vocab, text)
    }

    pub fn encode_target(&self, text: &str) -> Result<Vec<usize>> {
        encode(&self.target_vocab, text)
    }

    pub fn render_source(&self, seq: &[usize]) -> String {
        render(&self.source_vocab, seq)
    }

    pub fn render_target(&self, seq: &[usize]) -> String {
        render(&self.target_vocab, seq)
    }
}

fn encode(vocab: &[String], text: &str) -> Result<Vec<usize>> {
    text.split_whitespace()
        .map(|sym| {
            vocab
                .iter()
                .position(|v| v == sym)
                .ok_or_else(|| Error::arg(format!("symbol `{sym}` is not in the vocabulary")))
        })
        .collect()
}

fn render(vocab: &[String], seq: &[usize]) -> String {
    seq.iter().map(|&i| vocab[i].as_str()).collect::<Vec<_>>().join(" ")
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Copy => write!(f, "copy"),
            Transform::Reverse => write!(f, "reverse"),
            Transform::Shift(k) => write!(f, "shift({k})"),
        }
    }
}
