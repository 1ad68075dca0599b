//! The `qlagrange` command line. Exit codes: 0 ok, 1 domain failure,
//! 2 I/O or parse error, 3 non-convergence.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bellman::{
    greedy_policy, solve_q_star, value_iteration, DiscountFn, TabularQ, TieBreak, DEFAULT_MAX_ITERS, DEFAULT_TOL,
};
use crate::elp::{performance_j, EpisodicProcess, Mode, Policy};
use crate::error::{Error, Result};
use crate::io;
use crate::lagrangian::{
    check_saddle, fig3_elp, fig3_q_const, fig3_q_max, fig3_q_star, is_maximin_q, is_minimax_q, verify_strong_duality,
    vform_counterexample, CLASSIFY_TOL,
};
use crate::lamin::{
    model_greedy_policy, one_hot_table, train, Algorithm, DemoSource, ElpDemoSource, EvalOutcome, LrSchedule,
    MlpQModel, Optimizer, QModel, RunRecord, TabularQModel, TrainConfig,
};
use crate::seqgen::{
    evaluate_model, generate_demos, ingest_demos, write_demos, DecodeMode, Featurizer, ModelScorer, SeqDemoSource,
    SeqTaskSpec, StandardFeatures, Transform,
};

#[derive(Debug, Parser)]
#[command(
    name = "qlagrange",
    version,
    about = "Exact and learned Q-functions on episodic learning processes"
)]
struct Cli {
    /// Seed for any sampling not fixed by a config file.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Numerical tolerance; defaults to 1e-10 for solving and 1e-8 for classification.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the ELP conditions and print one line per violation.
    Validate { elp: String },
    /// Solve for Q* by value iteration, write it as CSV and print J of its greedy policy.
    Solve {
        elp: String,
        /// `episodic` or a CSV file with header `state,gamma`.
        #[arg(long, default_value = "episodic")]
        gamma: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the minimax value of the Lagrangian with J of a policy.
    Duality {
        elp: String,
        /// `greedy-qstar`, `uniform` or a CSV file with header `state,action,probability`.
        #[arg(long, default_value = "greedy-qstar")]
        policy: String,
    },
    /// Classify a Q-table as a minimax or maximin point.
    Saddle {
        elp: String,
        q: PathBuf,
        /// `uniform`, `greedy-qstar` or a policy CSV file.
        #[arg(long, default_value = "uniform")]
        policy: String,
        #[arg(long, value_enum)]
        kind: Option<Kind>,
    },
    /// Run the built-in counterexamples and print a pass/fail table.
    Counterexamples {
        /// Perturb the maximin table before checking it.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Train a Q-model from demonstrations described by a JSON config.
    Train { config: PathBuf },
    /// Generate demonstration pairs for a synthetic translation task.
    Seqgen {
        #[arg(long, default_value_t = 5)]
        vocab: usize,
        /// `copy`, `reverse` or `shift(k)`.
        #[arg(long, default_value = "copy")]
        transform: String,
        #[arg(long, default_value_t = 3)]
        min_len: usize,
        #[arg(long, default_value_t = 6)]
        max_len: usize,
        #[arg(long, default_value_t = 8)]
        horizon: usize,
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Write the TSV here instead of standard output.
        #[arg(long)]
        emit_demos: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Minimax,
    Maximin,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } | Error::Parse { .. } | Error::ParseLine { .. } => 2,
        Error::NotConverged { .. } => 3,
        _ => 1,
    }
}

/// Parses `args` (including the program name) and runs, printing to stdout.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    run_with(args, &mut stdout.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    if cli.tol.is_some_and(|t| !(t >= 0.0 && t.is_finite())) {
        return Err(Error::arg("--tol must be a finite non-negative number"));
    }
    match &cli.command {
        Command::Validate { elp } => validate(elp, out),
        Command::Solve { elp, gamma, out: path } => solve(cli, elp, gamma, path.as_deref(), out),
        Command::Duality { elp, policy } => duality(cli, elp, policy, out),
        Command::Saddle { elp, q, policy, kind } => saddle(cli, elp, q, policy, *kind, out),
        Command::Counterexamples { inject_fault } => counterexamples(*inject_fault, out),
        Command::Train { config } => train_cmd(cli, config, out),
        Command::Seqgen {
            vocab,
            transform,
            min_len,
            max_len,
            horizon,
            n,
            emit_demos,
        } => {
            let transform: Transform = transform.parse()?;
            let spec = SeqTaskSpec::new(*vocab, transform, (*min_len, *max_len), *horizon)?;
            let demos = generate_demos(&spec, *n, cli.seed)?;
            let text = write_demos(&demos, &spec);
            match emit_demos {
                Some(path) => {
                    io::write_atomic(path, text.as_bytes())?;
                    say(out, format!("wrote {} pairs to {}", demos.len(), path.display()))?;
                }
                None => out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))?,
            }
            Ok(0)
        }
    }
}

fn say(out: &mut dyn Write, line: impl std::fmt::Display) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

fn validate(elp: &str, out: &mut dyn Write) -> Result<i32> {
    let report = io::load_elp_raw(elp)?.validate();
    if report.is_valid() {
        say(out, "ok")?;
        return Ok(0);
    }
    for line in report.lines() {
        say(out, line)?;
    }
    Ok(1)
}

fn load_valid(elp: &str) -> Result<EpisodicProcess> {
    let p = io::load_elp(elp)?;
    p.ensure_valid()?;
    Ok(p)
}

fn greedy_j(p: &EpisodicProcess, q: &TabularQ, tie: TieBreak) -> Result<f64> {
    Ok(performance_j(p, &greedy_policy(q, tie), Mode::Exact)?.value)
}

fn solve(cli: &Cli, elp: &str, gamma: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<i32> {
    let p = load_valid(elp)?;
    let gamma = match gamma {
        "episodic" => DiscountFn::episodic(&p),
        file => io::read_gamma_csv(Path::new(file), &p)?,
    };
    let tol = cli.tol.unwrap_or(DEFAULT_TOL);
    let vi = value_iteration(
        &p,
        &gamma,
        &TabularQ::zeros(p.n_states(), p.n_actions()),
        tol,
        DEFAULT_MAX_ITERS,
    )?;
    if !vi.converged {
        return Err(Error::NotConverged {
            iterations: vi.iterations,
            residual: vi.residual,
        });
    }
    let path = path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cli.out_dir.join("q_star.csv"));
    io::write_atomic(&path, io::q_to_csv(&vi.q, &p).as_bytes())?;
    say(out, format!("iterations={} residual={:e}", vi.iterations, vi.residual))?;
    say(out, format!("J = {}", greedy_j(&p, &vi.q, TieBreak::FirstIndex)?))?;
    Ok(0)
}

fn resolve_policy(p: &EpisodicProcess, spec: &str) -> Result<Policy> {
    match spec {
        "greedy-qstar" => Ok(greedy_policy(&solve_q_star(p)?, TieBreak::FirstIndex)),
        "uniform" => Ok(Policy::uniform(p.n_states(), p.n_actions())),
        file => io::read_policy_csv(Path::new(file), p),
    }
}

fn duality(cli: &Cli, elp: &str, policy: &str, out: &mut dyn Write) -> Result<i32> {
    let p = load_valid(elp)?;
    let mu = resolve_policy(&p, policy)?;
    let r = verify_strong_duality(&p, &mu, cli.tol.unwrap_or(CLASSIFY_TOL))?;
    say(out, format!("minimax_value = {}", r.minimax_value))?;
    say(out, format!("J(mu) = {}", r.j_mu))?;
    say(out, format!("J(greedy Q*) = {}", r.j_greedy_q_star))?;
    if r.mu_suboptimal {
        say(out, "warning: policy is suboptimal")?;
    }
    say(
        out,
        format!("equal={} gap={:e}", r.equal, (r.minimax_value - r.j_mu).abs()),
    )?;
    Ok(0)
}

fn saddle(cli: &Cli, elp: &str, q: &Path, policy: &str, kind: Option<Kind>, out: &mut dyn Write) -> Result<i32> {
    let p = load_valid(elp)?;
    let q = io::read_q_csv(q, &p)?;
    let pi = resolve_policy(&p, policy)?;
    let tol = cli.tol.unwrap_or(CLASSIFY_TOL);
    let minimax = is_minimax_q(&p, &pi, &q, tol)?;
    let maximin = is_maximin_q(&p, &pi, &q, tol)?;
    let report = check_saddle(&p, &pi, &q, tol)?;
    say(out, format!("minimax={minimax}"))?;
    say(out, format!("maximin={maximin}"))?;
    say(
        out,
        format!(
            "feasible_primal={} slack_pi={} slack_q={} max_violation={:e}",
            report.feasible_primal, report.slack_pi_ok, report.slack_q_ok, report.max_violation
        ),
    )?;
    say(
        out,
        format!("J(greedy first-index) = {}", greedy_j(&p, &q, TieBreak::FirstIndex)?),
    )?;
    say(
        out,
        format!("J(greedy uniform) = {}", greedy_j(&p, &q, TieBreak::Uniform)?),
    )?;
    if let Some(kind) = kind {
        let verdict = match kind {
            Kind::Minimax => minimax,
            Kind::Maximin => maximin,
        };
        say(out, format!("verdict={verdict}"))?;
    }
    Ok(0)
}

fn counterexamples(inject_fault: bool, out: &mut dyn Write) -> Result<i32> {
    let p = fig3_elp();
    let pi = Policy::uniform(p.n_states(), p.n_actions());
    let tol = CLASSIFY_TOL;
    let mut q_max = fig3_q_max();
    if inject_fault {
        q_max.set(0, 1, q_max.get(0, 1) - 0.5);
    }
    let (q_star, q_const) = (fig3_q_star(), fig3_q_const());
    let close = |a: f64, b: f64| (a - b).abs() <= tol;
    let mut rows: Vec<(&str, bool)> = vec![
        ("fig3: Q* is minimax", is_minimax_q(&p, &pi, &q_star, tol)?),
        ("fig3: Q* is maximin", is_maximin_q(&p, &pi, &q_star, tol)?),
        ("fig3: constant 2 is minimax", is_minimax_q(&p, &pi, &q_const, tol)?),
        (
            "fig3: constant 2 is not maximin",
            !is_maximin_q(&p, &pi, &q_const, tol)?,
        ),
        (
            "fig3: constant 2 greedy (uniform ties) has J = 5/3",
            close(greedy_j(&p, &q_const, TieBreak::Uniform)?, 5.0 / 3.0),
        ),
        ("fig3: Q_max is maximin", is_maximin_q(&p, &pi, &q_max, tol)?),
        ("fig3: Q_max is not minimax", !is_minimax_q(&p, &pi, &q_max, tol)?),
        (
            "fig3: Q_max greedy has J = 2 under both tie-breaks",
            close(greedy_j(&p, &q_max, TieBreak::FirstIndex)?, 2.0)
                && close(greedy_j(&p, &q_max, TieBreak::Uniform)?, 2.0),
        ),
    ];
    let vf = vform_counterexample();
    let v_min_ok = vf.v_min == [1.0, 2.0, 2.0, 0.0];
    rows.push(("v-form: V_min = (1,2,2,0)", v_min_ok));
    rows.push((
        "v-form: V_min is LP-feasible and optimal",
        vf.lp_check.feasible && vf.lp_check.attains_optimum,
    ));
    rows.push(("v-form: backups tie at the initial state", vf.lp_check.backups_tie));
    let star = vf.mdp.v_star();
    rows.push((
        "v-form: V* breaks the tie",
        vf.mdp.backup(&star, 0, 1) > vf.mdp.backup(&star, 0, 0) + tol,
    ));
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    for (name, ok) in &rows {
        say(out, format!("{name:width$}  {}", if *ok { "PASS" } else { "FAIL" }))?;
    }
    say(
        out,
        format!(
            "V_min = {:?}, backups at state 0 = {:?}",
            vf.v_min, vf.lp_check.backups_at_initial
        ),
    )?;
    Ok(if rows.iter().all(|r| r.1) { 0 } else { 1 })
}

/// A training run. Unset optional fields take the defaults of the model kind,
/// and the fully resolved config is written as the first line of `run.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskConfig,
    pub model: ModelConfig,
    pub algorithm: Algorithm,
    pub beta: f64,
    #[serde(default)]
    pub lr: Option<LrSchedule>,
    #[serde(default)]
    pub optimizer: Option<Optimizer>,
    #[serde(default)]
    pub n_updates: Option<usize>,
    #[serde(default)]
    pub batch: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub eval_every: Option<usize>,
    #[serde(default)]
    pub expected_t: Option<f64>,
    #[serde(default)]
    pub clip_norm: Option<f64>,
    /// Stop once an evaluation reaches this value.
    #[serde(default)]
    pub target_eval: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    /// An ELP file or `builtin:NAME`; the expert defaults to the greedy policy of Q*.
    Elp {
        path: String,
        #[serde(default)]
        expert: Option<String>,
    },
    Seqgen(SeqgenTask),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeqgenTask {
    pub vocab: usize,
    pub transform: String,
    pub min_len: usize,
    pub max_len: usize,
    pub horizon: usize,
    #[serde(default = "default_train_pairs")]
    pub train_pairs: usize,
    #[serde(default = "default_eval_pairs")]
    pub eval_pairs: usize,
    #[serde(default)]
    pub data_seed: Option<u64>,
    /// TSV of training pairs; replaces generated ones.
    #[serde(default)]
    pub demos: Option<String>,
}

fn default_train_pairs() -> usize {
    4_000
}

fn default_eval_pairs() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Tabular,
    Mlp {
        hidden: usize,
        #[serde(default)]
        init_seed: u64,
    },
}

impl ExperimentConfig {
    fn train_config(&self, global_seed: u64) -> TrainConfig {
        let base = match self.model {
            ModelConfig::Tabular => TrainConfig::tabular(self.algorithm, self.beta),
            ModelConfig::Mlp { .. } => TrainConfig::mlp(self.algorithm, self.beta),
        };
        TrainConfig {
            lr: self.lr.unwrap_or(base.lr),
            optimizer: self.optimizer.unwrap_or(base.optimizer),
            n_updates: self.n_updates.unwrap_or(base.n_updates),
            batch: self.batch.unwrap_or(base.batch),
            seed: self.seed.unwrap_or(global_seed),
            eval_every: self.eval_every.unwrap_or(base.eval_every),
            expected_t: self.expected_t.or(base.expected_t),
            clip_norm: self.clip_norm.or(base.clip_norm),
            ..base
        }
    }
}

fn resolve_path(base: &Path, p: &str) -> String {
    if p.starts_with("builtin:") || Path::new(p).is_absolute() {
        p.to_string()
    } else {
        base.join(p).to_string_lossy().into_owned()
    }
}

enum AnyModel {
    Tabular(TabularQModel),
    Mlp(MlpQModel),
}

impl AnyModel {
    fn new(cfg: &ModelConfig, input_dim: usize, n_actions: usize) -> Self {
        match *cfg {
            ModelConfig::Tabular => AnyModel::Tabular(TabularQModel::zeros(input_dim, n_actions)),
            ModelConfig::Mlp { hidden, init_seed } => {
                AnyModel::Mlp(MlpQModel::new(input_dim, hidden, n_actions, init_seed))
            }
        }
    }

    fn as_dyn(&mut self) -> &mut dyn QModel {
        match self {
            AnyModel::Tabular(m) => m,
            AnyModel::Mlp(m) => m,
        }
    }

    fn saved(self) -> io::SavedModel {
        match self {
            AnyModel::Tabular(m) => io::SavedModel::Tabular(m),
            AnyModel::Mlp(m) => io::SavedModel::Mlp(m),
        }
    }
}

#[derive(Serialize)]
struct Header<'a> {
    experiment: &'a ExperimentConfig,
    train: &'a TrainConfig,
}

fn train_cmd(cli: &Cli, path: &Path, out: &mut dyn Write) -> Result<i32> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut exp: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let cfg = exp.train_config(cli.seed);
    cfg.validate()?;
    let target = exp.target_eval;
    let stop = move |v: f64| target.is_some_and(|t| v >= t);

    let (record, model) = match &mut exp.task {
        TaskConfig::Elp { path: elp, expert } => {
            *elp = resolve_path(base, elp);
            if let Some(e) = expert.as_mut() {
                *e = resolve_path(base, e);
            }
            let p = load_valid(elp)?;
            let mu = match expert {
                Some(file) => io::read_policy_csv(Path::new(file), &p)?,
                None => greedy_policy(&solve_q_star(&p)?, TieBreak::FirstIndex),
            };
            let feats = one_hot_table(p.n_states());
            let mut model = AnyModel::new(&exp.model, p.n_states(), p.n_actions());
            let mut source = ElpDemoSource::new(&p, &mu, feats.clone())?;
            let record = run_training(
                model.as_dyn(),
                &mut source,
                &cfg,
                |m| {
                    let pi = model_greedy_policy(m, &feats, TieBreak::FirstIndex);
                    Ok(performance_j(&p, &pi, Mode::Exact)?.value)
                },
                &stop,
            )?;
            (record, model)
        }
        TaskConfig::Seqgen(task) => {
            if !matches!(exp.model, ModelConfig::Mlp { .. }) {
                return Err(Error::arg("sequence tasks need an mlp model"));
            }
            let transform: Transform = task.transform.parse()?;
            let spec = SeqTaskSpec::new(task.vocab, transform, (task.min_len, task.max_len), task.horizon)?;
            let data_seed = *task.data_seed.get_or_insert(cli.seed);
            let train_set = match task.demos.as_mut() {
                Some(file) => {
                    *file = resolve_path(base, file);
                    ingest_demos(Path::new(file), &spec)?
                }
                None => generate_demos(&spec, task.train_pairs, data_seed)?,
            };
            let heldout =
                generate_demos(&spec, task.eval_pairs, data_seed.wrapping_add(1))?.without_sources_in(&train_set);
            let feats = StandardFeatures::new(&spec);
            let mut model = AnyModel::new(&exp.model, feats.dim(), spec.n_actions());
            let mut source = SeqDemoSource::new(&spec, &train_set, feats.clone())?;
            let record = run_training(
                model.as_dyn(),
                &mut source,
                &cfg,
                |m| {
                    let scorer = ModelScorer::new(m, feats.clone());
                    Ok(evaluate_model(&scorer, &spec, &heldout, DecodeMode::Greedy)?.exact_match_rate)
                },
                &stop,
            )?;
            (record, model)
        }
    };

    let dir = &cli.out_dir;
    let mut jsonl = serde_json::to_string(&Header {
        experiment: &exp,
        train: &cfg,
    })
    .expect("header serializes");
    jsonl.push('\n');
    for e in &record.entries {
        jsonl.push_str(&serde_json::to_string(e).expect("entry serializes"));
        jsonl.push('\n');
    }
    io::write_atomic(&dir.join("run.jsonl"), jsonl.as_bytes())?;
    let mut curve = String::from("update,eval_J\n");
    for (u, j) in record.curve() {
        curve.push_str(&format!("{u},{j}\n"));
    }
    io::write_atomic(&dir.join("curve.csv"), curve.as_bytes())?;
    let saved = serde_json::to_string(&model.saved()).expect("model serializes");
    io::write_atomic(&dir.join("model.json"), saved.as_bytes())?;

    say(out, format!("updates = {}", record.entries.len()))?;
    match record.final_eval() {
        Some(j) => say(out, format!("final eval_J = {j}"))?,
        None => say(out, "final eval_J = none")?,
    }
    Ok(0)
}

fn run_training(
    model: &mut dyn QModel,
    source: &mut dyn DemoSource,
    cfg: &TrainConfig,
    mut eval: impl FnMut(&dyn QModel) -> Result<f64>,
    stop: &dyn Fn(f64) -> bool,
) -> Result<RunRecord> {
    train(model, source, cfg, |m, _| {
        let j = eval(m)?;
        Ok(EvalOutcome {
            eval_j: j,
            stop: stop(j),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String) {
        let mut buf = Vec::new();
        let code = run_with(std::iter::once("qlagrange").chain(args.iter().copied()), &mut buf);
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn counterexamples_pass_and_fault_is_caught() {
        let (code, text) = run_capture(&["counterexamples"]);
        assert_eq!(code, 0, "{text}");
        assert!(!text.contains("FAIL"));
        let (code, text) = run_capture(&["counterexamples", "--inject-fault"]);
        assert_eq!(code, 1);
        assert!(text.contains("FAIL"));
    }

    #[test]
    fn duality_on_builtin() {
        let (code, text) = run_capture(&["duality", "builtin:fig3"]);
        assert_eq!(code, 0);
        assert!(text.contains("equal=true"), "{text}");
    }

    #[test]
    fn config_defaults_follow_model_kind() {
        let exp: ExperimentConfig = serde_json::from_str(
            r#"{"task": {"elp": {"path": "builtin:fig3"}}, "model": {"kind": "tabular"},
                "algorithm": "lamin1", "beta": 0.5}"#,
        )
        .unwrap();
        let cfg = exp.train_config(9);
        assert_eq!(
            cfg,
            TrainConfig {
                seed: 9,
                ..TrainConfig::tabular(Algorithm::Lamin1, 0.5)
            }
        );
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(run_capture(&["frobnicate"]).0, 2);
    }
}
