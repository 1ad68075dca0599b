//! Training loop shared by LAMIN1, LAMIN2 and the behavior-cloning baseline.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::estimator::{behavior_cloning_update, lamin1_update, lamin2_update, DemoBatch, EstimatorConfig};
use super::model::QModel;
use crate::bellman::{greedy_policy, TabularQ, TieBreak};
use crate::elp::{rollout_from, EpisodicProcess, Policy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Lamin1,
    Lamin2,
    BehaviorCloning,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lamin1" => Ok(Algorithm::Lamin1),
            "lamin2" => Ok(Algorithm::Lamin2),
            "behavior_cloning" | "bc" => Ok(Algorithm::BehaviorCloning),
            _ => Err(Error::arg(format!("unknown algorithm `{s}`"))),
        }
    }
}

/// Step size `base * min((t+1)/w, sqrt(w/(t+1)))` with warmup `w`, else constant `base`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base: f64,
    pub warmup: Option<usize>,
}

impl LrSchedule {
    pub fn constant(base: f64) -> Self {
        LrSchedule { base, warmup: None }
    }

    pub fn inverse_sqrt(base: f64, warmup: usize) -> Self {
        LrSchedule {
            base,
            warmup: Some(warmup),
        }
    }

    pub fn rate(&self, step: usize) -> f64 {
        match self.warmup {
            None | Some(0) => self.base,
            Some(w) => {
                let t = (step + 1) as f64;
                let w = w as f64;
                self.base * (t / w).min((w / t).sqrt())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    /// Boltzmann temperature; LAMIN2 accepts 0 for the greedy successor.
    pub beta: f64,
    pub lr: LrSchedule,
    pub optimizer: Optimizer,
    pub n_updates: usize,
    /// Complete episodes per update.
    pub batch: usize,
    pub seed: u64,
    /// Evaluate every this many updates; 0 evaluates only at the end.
    pub eval_every: usize,
    /// Replaces the `n/k` episode-length estimate when set.
    pub expected_t: Option<f64>,
    pub clip_norm: Option<f64>,
}

impl TrainConfig {
    /// Constant step 0.05, plain SGD.
    pub fn tabular(algorithm: Algorithm, beta: f64) -> Self {
        TrainConfig {
            algorithm,
            beta,
            lr: LrSchedule::constant(0.05),
            optimizer: Optimizer::Sgd,
            n_updates: 5_000,
            batch: 4,
            seed: 0,
            eval_every: 500,
            expected_t: None,
            clip_norm: None,
        }
    }

    /// Inverse-square-root schedule with a 200-step warmup, Adam.
    pub fn mlp(algorithm: Algorithm, beta: f64) -> Self {
        TrainConfig {
            algorithm,
            beta,
            lr: LrSchedule::inverse_sqrt(0.01, 200),
            optimizer: Optimizer::adam(),
            n_updates: 50_000,
            batch: 8,
            seed: 0,
            eval_every: 1_000,
            expected_t: None,
            clip_norm: Some(5.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let beta_ok = match self.algorithm {
            Algorithm::Lamin1 => self.beta > 0.0,
            _ => self.beta >= 0.0,
        };
        if !beta_ok || !self.beta.is_finite() {
            return Err(Error::arg(format!("invalid temperature {}", self.beta)));
        }
        if !(self.lr.base > 0.0) {
            return Err(Error::arg("learning rate must be positive"));
        }
        if self.batch == 0 {
            return Err(Error::arg("batch must hold at least one episode"));
        }
        Ok(())
    }
}

/// Supplies demonstration blocks of `k` complete episodes.
pub trait DemoSource {
    fn next_batch(&mut self, rng: &mut ChaCha8Rng, k: usize) -> Result<DemoBatch>;
}

/// Expert rollouts on an ELP. Blocks are contiguous: each starts from the
/// terminal step that ended the previous one.
#[derive(Debug, Clone)]
pub struct ElpDemoSource<'a> {
    process: &'a EpisodicProcess,
    expert: &'a Policy,
    features: Vec<Vec<f64>>,
    carry: Option<(usize, usize)>,
}

impl<'a> ElpDemoSource<'a> {
    pub fn new(process: &'a EpisodicProcess, expert: &'a Policy, features: Vec<Vec<f64>>) -> Result<Self> {
        if features.len() != process.n_states() {
            return Err(Error::dim("one feature vector per state is required"));
        }
        Ok(ElpDemoSource {
            process,
            expert,
            features,
            carry: None,
        })
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }
}

impl DemoSource for ElpDemoSource<'_> {
    fn next_batch(&mut self, rng: &mut ChaCha8Rng, k: usize) -> Result<DemoBatch> {
        let (s0, a0) = match self.carry {
            Some(pair) => pair,
            None => {
                let s = self.process.start_state();
                (s, self.expert.sample(s, rng))
            }
        };
        let traj = rollout_from(self.process, self.expert, rng, s0, a0, k)?;
        let last = traj.last_step().expect("k >= 1 episodes");
        self.carry = Some((last.state, last.action));
        let mut features = vec![self.features[s0].clone()];
        let mut actions = vec![a0];
        let mut terminal = vec![self.process.is_terminal(s0)];
        let mut rewards = vec![self.process.reward(s0)];
        for st in &traj.steps {
            features.push(self.features[st.state].clone());
            actions.push(st.action);
            terminal.push(self.process.is_terminal(st.state));
            rewards.push(st.reward);
        }
        DemoBatch::new(features, actions, terminal, rewards)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub eval_j: f64,
    pub stop: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub update: usize,
    pub loss: f64,
    pub grad_norm: f64,
    #[serde(rename = "eval_J")]
    pub eval_j: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: TrainConfig,
    pub entries: Vec<RunEntry>,
}

impl RunRecord {
    pub fn losses(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.loss).collect()
    }

    /// `(update, eval_J)` pairs at evaluation points.
    pub fn curve(&self) -> Vec<(usize, f64)> {
        self.entries
            .iter()
            .filter_map(|e| e.eval_j.map(|j| (e.update, j)))
            .collect()
    }

    pub fn final_eval(&self) -> Option<f64> {
        self.curve().last().map(|p| p.1)
    }
}

/// Generator for update `step`: one ChaCha stream per step under the run seed.
pub fn step_rng(seed: u64, step: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step as u64);
    rng
}

/// Runs `cfg.n_updates` updates, calling `eval` at the configured cadence and
/// after the last update. The hook may stop training early.
pub fn train<M, S, E>(model: &mut M, source: &mut S, cfg: &TrainConfig, mut eval: E) -> Result<RunRecord>
where
    M: QModel + ?Sized,
    S: DemoSource + ?Sized,
    E: FnMut(&M, usize) -> Result<EvalOutcome>,
{
    cfg.validate()?;
    let est = EstimatorConfig {
        beta: cfg.beta,
        expected_t: cfg.expected_t,
    };
    let n = model.n_params();
    let (mut m1, mut m2) = (vec![0.0; n], vec![0.0; n]);
    let mut entries = Vec::with_capacity(cfg.n_updates);
    let clock = Instant::now();
    for step in 0..cfg.n_updates {
        let mut rng = step_rng(cfg.seed, step);
        let batch = source.next_batch(&mut rng, cfg.batch)?;
        let mut upd = match cfg.algorithm {
            Algorithm::Lamin1 => lamin1_update(model, &batch, &est)?,
            Algorithm::Lamin2 => lamin2_update(model, &batch, &est)?,
            Algorithm::BehaviorCloning => behavior_cloning_update(model, &batch)?,
        };
        let grad_norm = upd.grad_norm();
        if let Some(c) = cfg.clip_norm {
            if grad_norm > c {
                upd.delta.iter_mut().for_each(|d| *d *= c / grad_norm);
            }
        }
        let rate = cfg.lr.rate(step);
        match cfg.optimizer {
            Optimizer::Sgd => model.apply_update(&upd.delta, rate),
            Optimizer::Adam { beta1, beta2, eps } => {
                let t = (step + 1) as i32;
                let (c1, c2) = (1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
                for i in 0..n {
                    let g = upd.delta[i];
                    m1[i] = beta1 * m1[i] + (1.0 - beta1) * g;
                    m2[i] = beta2 * m2[i] + (1.0 - beta2) * g * g;
                    upd.delta[i] = (m1[i] / c1) / ((m2[i] / c2).sqrt() + eps);
                }
                model.apply_update(&upd.delta, rate);
            }
        }
        let update = step + 1;
        if !upd.loss.is_finite() || model.params().iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite { update });
        }
        let due = update == cfg.n_updates || (cfg.eval_every > 0 && update % cfg.eval_every == 0);
        let outcome = if due { Some(eval(model, update)?) } else { None };
        entries.push(RunEntry {
            update,
            loss: upd.loss,
            grad_norm,
            eval_j: outcome.map(|o| o.eval_j),
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
        });
        if outcome.is_some_and(|o| o.stop) {
            break;
        }
    }
    Ok(RunRecord {
        config: cfg.clone(),
        entries,
    })
}

/// Q-table of `model` over a per-state feature table.
pub fn model_q_table<M: QModel + ?Sized>(model: &M, features: &[Vec<f64>]) -> TabularQ {
    let rows: Vec<Vec<f64>> = features.iter().map(|x| model.q_values(x)).collect();
    TabularQ::from_fn(features.len(), model.n_actions(), |s, a| rows[s][a])
}

pub fn model_greedy_policy<M: QModel + ?Sized>(model: &M, features: &[Vec<f64>], tie_break: TieBreak) -> Policy {
    greedy_policy(&model_q_table(model, features), tie_break)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elp::{performance_j, Mode};
    use crate::lagrangian::fig3_elp;
    use crate::lamin::{one_hot_table, TabularQModel};

    fn fig3_run(cfg: &TrainConfig) -> (TabularQModel, RunRecord) {
        let p = fig3_elp();
        let expert = Policy::constant(6, 3, 1).unwrap();
        let mut src = ElpDemoSource::new(&p, &expert, one_hot_table(6)).unwrap();
        let mut model = TabularQModel::zeros(6, 3);
        let feats = one_hot_table(6);
        let rec = train(&mut model, &mut src, cfg, |m, _| {
            let pi = model_greedy_policy(m, &feats, TieBreak::FirstIndex);
            Ok(EvalOutcome {
                eval_j: performance_j(&p, &pi, Mode::Exact)?.value,
                stop: false,
            })
        })
        .unwrap();
        (model, rec)
    }

    #[test]
    fn lamin1_solves_fig3() {
        let (_, rec) = fig3_run(&TrainConfig::tabular(Algorithm::Lamin1, 0.01));
        assert!((rec.final_eval().unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn zero_updates_change_nothing() {
        let cfg = TrainConfig {
            n_updates: 0,
            ..TrainConfig::tabular(Algorithm::Lamin1, 0.01)
        };
        let (model, rec) = fig3_run(&cfg);
        assert!(rec.entries.is_empty());
        assert_eq!(model, TabularQModel::zeros(6, 3));
    }

    #[test]
    fn cloning_matches_expert_at_visited_states() {
        let cfg = TrainConfig {
            n_updates: 2_000,
            ..TrainConfig::tabular(Algorithm::BehaviorCloning, 1.0)
        };
        let (model, _) = fig3_run(&cfg);
        let pi = model_greedy_policy(&model, &one_hot_table(6), TieBreak::FirstIndex);
        assert_eq!(pi.deterministic_action(0), Some(1));
    }

    #[test]
    fn runs_are_reproducible() {
        let cfg = TrainConfig {
            n_updates: 300,
            ..TrainConfig::tabular(Algorithm::Lamin2, 0.5)
        };
        let (m1, r1) = fig3_run(&cfg);
        let (m2, r2) = fig3_run(&cfg);
        assert_eq!(m1, m2);
        assert_eq!(r1.losses(), r2.losses());
    }

    #[test]
    fn schedule_shape() {
        let s = LrSchedule::inverse_sqrt(1.0, 100);
        assert!((s.rate(99) - 1.0).abs() < 1e-12);
        assert!(s.rate(0) < s.rate(50));
        assert!((s.rate(399) - 0.5).abs() < 1e-12);
    }

    struct Poisoned;

    impl DemoSource for Poisoned {
        fn next_batch(&mut self, _: &mut ChaCha8Rng, _: usize) -> Result<DemoBatch> {
            DemoBatch::new(
                vec![vec![1.0, 0.0], vec![0.0, f64::NAN], vec![1.0, 0.0]],
                vec![0, 0, 0],
                vec![true, false, true],
                vec![0.0; 3],
            )
        }
    }

    #[test]
    fn non_finite_values_abort() {
        let cfg = TrainConfig::tabular(Algorithm::Lamin1, 0.1);
        let mut model = TabularQModel::zeros(2, 2);
        let err = train(&mut model, &mut Poisoned, &cfg, |_, _| {
            Ok(EvalOutcome {
                eval_j: 0.0,
                stop: false,
            })
        });
        assert!(matches!(err, Err(Error::NonFinite { update: 1 })), "{err:?}");
    }
}
