use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::features::Featurizer;
use super::{SeqElp, SeqState, SeqTaskSpec};
use crate::error::{Error, Result};
use crate::lamin::{DemoBatch, DemoSource};

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Generated { seed: u64 },
    Ingested { path: PathBuf },
}

/// Source-reference pairs of symbol indices.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoSet {
    pub pairs: Vec<(Vec<usize>, Vec<usize>)>,
    pub provenance: Provenance,
}

impl DemoSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Drops pairs whose source also appears in `other`.
    pub fn without_sources_in(mut self, other: &DemoSet) -> DemoSet {
        let seen: std::collections::HashSet<&Vec<usize>> = other.pairs.iter().map(|p| &p.0).collect();
        self.pairs.retain(|p| !seen.contains(&p.0));
        self
    }
}

/// `n` pairs `(X, transform(X))` with sources drawn from the reset distribution.
pub fn generate_demos(spec: &SeqTaskSpec, n: usize, seed: u64) -> Result<DemoSet> {
    if n == 0 {
        return Err(Error::arg("need at least one demonstration"));
    }
    let env = SeqElp::new(spec.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = (0..n)
        .map(|_| {
            let src = env.sample_source(&mut rng);
            let tgt = spec.transform(&src);
            (src, tgt)
        })
        .collect();
    Ok(DemoSet {
        pairs,
        provenance: Provenance::Generated { seed },
    })
}

/// Parses `source<TAB>target` lines with space-separated symbols. Blank lines
/// and lines starting with `#` are skipped.
pub fn parse_demos(text: &str, spec: &SeqTaskSpec, path: &Path) -> Result<DemoSet> {
    let err = |line: usize, msg: String| Error::ParseLine {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let (src, tgt) = trimmed
            .split_once('\t')
            .ok_or_else(|| err(line, "expected `source<TAB>target`".into()))?;
        if tgt.contains('\t') {
            return Err(err(line, "more than one tab".into()));
        }
        let src = spec.encode_source(src).map_err(|e| err(line, e.to_string()))?;
        let tgt = spec.encode_target(tgt).map_err(|e| err(line, e.to_string()))?;
        if src.is_empty() {
            return Err(err(line, "empty source".into()));
        }
        if tgt.len() > spec.max_len {
            return Err(err(
                line,
                format!("target has {} symbols, max_len is {}", tgt.len(), spec.max_len),
            ));
        }
        pairs.push((src, tgt));
    }
    if pairs.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            msg: "no demonstration pairs".into(),
        });
    }
    Ok(DemoSet {
        pairs,
        provenance: Provenance::Ingested {
            path: path.to_path_buf(),
        },
    })
}

pub fn ingest_demos(path: &Path, spec: &SeqTaskSpec) -> Result<DemoSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_demos(&text, spec, path)
}

pub fn write_demos(set: &DemoSet, spec: &SeqTaskSpec) -> String {
    let mut out = String::new();
    for (src, tgt) in &set.pairs {
        out.push_str(&spec.render_source(src));
        out.push('\t');
        out.push_str(&spec.render_target(tgt));
        out.push('\n');
    }
    out
}

/// Demonstration blocks drawn uniformly with replacement from a [`DemoSet`].
/// Each block starts at the closed output of the previous one.
#[derive(Debug, Clone)]
pub struct SeqDemoSource<'a, F> {
    env: SeqElp,
    demos: &'a DemoSet,
    featurizer: F,
    carry: SeqState,
}

impl<'a, F: Featurizer> SeqDemoSource<'a, F> {
    pub fn new(spec: &SeqTaskSpec, demos: &'a DemoSet, featurizer: F) -> Result<Self> {
        if demos.is_empty() {
            return Err(Error::arg("empty demonstration set"));
        }
        Ok(SeqDemoSource {
            env: SeqElp::new(spec.clone())?,
            demos,
            featurizer,
            carry: SeqState::sentinel(),
        })
    }
}

impl<F: Featurizer> DemoSource for SeqDemoSource<'_, F> {
    fn next_batch(&mut self, rng: &mut ChaCha8Rng, k: usize) -> Result<DemoBatch> {
        let terminal_action = self.env.spec().terminal_action;
        let mut features = vec![self.featurizer.features(&self.carry)];
        let mut actions = vec![terminal_action];
        let mut terminal = vec![true];
        let mut rewards = vec![self.env.reward(&self.carry)];
        let eos = self.env.spec().eos();
        for _ in 0..k {
            let (src, tgt) = &self.demos.pairs[rng.random_range(0..self.demos.len())];
            let mut s = SeqState::initial(src.clone());
            let mut script = tgt.iter().copied().chain(std::iter::once(eos));
            while !s.done {
                let a = script.next().expect("script ends with eos");
                features.push(self.featurizer.features(&s));
                actions.push(a);
                terminal.push(false);
                rewards.push(0.0);
                s = self.env.advance(&s, a);
            }
            features.push(self.featurizer.features(&s));
            actions.push(terminal_action);
            terminal.push(true);
            rewards.push(self.env.reward(&s));
            self.carry = s;
        }
        DemoBatch::new(features, actions, terminal, rewards)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqgen::{StandardFeatures, Transform};

    fn spec() -> SeqTaskSpec {
        SeqTaskSpec::new(3, Transform::Reverse, (1, 3), 3).unwrap()
    }

    #[test]
    fn generation_is_deterministic() {
        let s = SeqTaskSpec::new(5, Transform::Copy, (3, 6), 8).unwrap();
        let a = generate_demos(&s, 3, 9).unwrap();
        assert_eq!(a, generate_demos(&s, 3, 9).unwrap());
        assert!(a.pairs.iter().all(|(x, y)| x == y && (3..=6).contains(&x.len())));
    }

    #[test]
    fn parse_valid_and_invalid() {
        let p = Path::new("demo.tsv");
        let set = parse_demos("# header\na b\tb a\n", &spec(), p).unwrap();
        assert_eq!(set.pairs, vec![(vec![0, 1], vec![1, 0])]);
        match parse_demos("a b\tb a\na q\ta\n", &spec(), p) {
            Err(Error::ParseLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_demos("a b c\ta b c a\n", &spec(), p).is_err());
        assert!(parse_demos("a b\n", &spec(), p).is_err());
    }

    #[test]
    fn write_then_parse() {
        let s = spec();
        let set = generate_demos(&s, 20, 1).unwrap();
        let back = parse_demos(&write_demos(&set, &s), &s, Path::new("x")).unwrap();
        assert_eq!(back.pairs, set.pairs);
    }

    #[test]
    fn blocks_follow_the_reference() {
        let s = spec();
        let set = DemoSet {
            pairs: vec![(vec![0, 2], vec![2, 0])],
            provenance: Provenance::Generated { seed: 0 },
        };
        let mut src = SeqDemoSource::new(&s, &set, StandardFeatures::new(&s)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = src.next_batch(&mut rng, 2).unwrap();
        assert_eq!(b.actions, vec![0, 2, 0, 3, 0, 2, 0, 3, 0]);
        assert_eq!(b.n_episodes(), 2);
        assert_eq!(b.rewards.last(), Some(&100.0));
        // the next block opens with the closed output
        let b2 = src.next_batch(&mut rng, 1).unwrap();
        assert_eq!(b2.features[0], *b.features.last().unwrap());
    }
}
