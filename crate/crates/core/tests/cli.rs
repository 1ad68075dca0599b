//! End-to-end runs of the `qlagrange` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use qlagrange::io::{elp_to_json, q_to_csv};
use qlagrange::lagrangian::{fig3_elp, fig3_q_max};

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn qlagrange(dir: &Path, args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_qlagrange"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn fig3_file(dir: &Path) -> String {
    write(dir, "fig3.json", &elp_to_json(&fig3_elp())).display().to_string()
}

fn zero_reward_file(dir: &Path) -> String {
    let p = fig3_elp().with_rewards(vec![0.0; 6]).unwrap();
    write(dir, "zero.json", &elp_to_json(&p)).display().to_string()
}

fn value_after(stdout: &str, key: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no `{key}` in:\n{stdout}"))
        .trim()
        .parse()
        .unwrap()
}

fn q_rows(text: &str) -> Vec<(String, String, f64)> {
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string(), f[2].parse().unwrap())
        })
        .collect()
}

fn constant_q_csv(dir: &Path, c: f64) -> String {
    let mut text = String::from("state,action,value\n");
    for s in 0..6 {
        for a in ["1", "2", "3"] {
            text.push_str(&format!("{s},{a},{c}\n"));
        }
    }
    write(dir, "const.csv", &text).display().to_string()
}

#[test]
fn validate_accepts_fig3() {
    let dir = tempfile::tempdir().unwrap();
    let r = qlagrange(dir.path(), &["validate", &fig3_file(dir.path())]);
    assert_eq!(r.code, 0);
    assert_eq!(r.stdout.trim(), "ok");
}

#[test]
fn validate_names_a_bad_row() {
    let dir = tempfile::tempdir().unwrap();
    let text = elp_to_json(&fig3_elp());
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["transitions"]["1"]["2"] = serde_json::json!({"3": 0.5});
    let path = write(dir.path(), "bad.json", &doc.to_string());
    let r = qlagrange(dir.path(), &["validate", path.to_str().unwrap()]);
    assert_eq!(r.code, 1, "{}", r.stdout);
    assert!(r.stdout.contains("state=1 action=2"), "{}", r.stdout);
}

#[test]
fn validate_missing_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = qlagrange(dir.path(), &["validate", "no/such/file.json"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("no/such/file.json"));
}

#[test]
fn solve_fig3_writes_q_star() {
    let dir = tempfile::tempdir().unwrap();
    let r = qlagrange(dir.path(), &["solve", &fig3_file(dir.path())]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(value_after(&r.stdout, "J = "), 2.0);
    let rows = q_rows(&fs::read_to_string(dir.path().join("q_star.csv")).unwrap());
    assert_eq!(rows.len(), 18);
    // Q*(0,2) = 2 through the reward-2 terminal, Q*(3,a) = 2 via the restart
    let get = |s: &str, a: &str| rows.iter().find(|r| r.0 == s && r.1 == a).unwrap().2;
    assert!((get("0", "2") - 2.0).abs() < 1e-9);
    assert!((get("3", "1") - 2.0).abs() < 1e-9);
}

#[test]
fn solve_zero_reward_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("z.csv");
    let r = qlagrange(
        dir.path(),
        &["solve", &zero_reward_file(dir.path()), "--out", out.to_str().unwrap()],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(value_after(&r.stdout, "J = "), 0.0);
    let rows = q_rows(&fs::read_to_string(out).unwrap());
    assert!(rows.iter().all(|r| r.2 == 0.0));
}

#[test]
fn solve_rejects_unit_terminal_discount() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "g.csv", "state,gamma\n0,1\n1,1\n2,1\n3,1\n4,1\n5,0\n");
    let r = qlagrange(
        dir.path(),
        &["solve", &fig3_file(dir.path()), "--gamma", g.to_str().unwrap()],
    );
    assert_eq!(r.code, 1, "{}", r.stderr);
}

#[test]
fn solve_tolerance_handling() {
    let dir = tempfile::tempdir().unwrap();
    let fig3 = fig3_file(dir.path());
    // fig3 reaches an exact fixed point, so a zero tolerance still converges
    let r = qlagrange(dir.path(), &["--tol", "0", "solve", &fig3]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(qlagrange(dir.path(), &["--tol=-1", "solve", &fig3]).code, 1);
}

#[test]
fn solve_reports_non_convergence() {
    // a self-loop kept with probability 1 - 1e-6 contracts too slowly for the sweep budget
    let dir = tempfile::tempdir().unwrap();
    let p = qlagrange::elp::EpisodicProcess::builder(2, 1)
        .terminal(1)
        .reset(vec![1.0, 0.0])
        .transition(0, 0, vec![1.0 - 1e-6, 1e-6])
        .reward(0, 1.0)
        .build()
        .unwrap();
    let path = write(dir.path(), "slow.json", &elp_to_json(&p));
    let r = qlagrange(dir.path(), &["solve", path.to_str().unwrap()]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(r.stderr.contains("residual"));
    assert!(!dir.path().join("q_star.csv").exists());
}

#[test]
fn duality_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let fig3 = fig3_file(dir.path());
    let r = qlagrange(dir.path(), &["duality", &fig3]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("equal=true"), "{}", r.stdout);
    let gap: f64 = r.stdout.split("gap=").nth(1).unwrap().trim().parse().unwrap();
    assert!(gap < 1e-8);

    let mut text = String::from("state,action,probability\n");
    for s in 0..6 {
        text.push_str(&format!("{s},1,1\n"));
    }
    let pi = write(dir.path(), "pi.csv", &text);
    let r = qlagrange(dir.path(), &["duality", &fig3, "--policy", pi.to_str().unwrap()]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("equal=false"), "{}", r.stdout);
    assert!(r.stdout.contains("warning"));
    assert_eq!(value_after(&r.stdout, "J(mu) = "), 1.0);

    let r = qlagrange(dir.path(), &["duality", &zero_reward_file(dir.path())]);
    assert!(r.stdout.contains("equal=true gap=0e0"), "{}", r.stdout);
}

#[test]
fn saddle_classifies_the_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let fig3 = fig3_file(dir.path());
    let c2 = constant_q_csv(dir.path(), 2.0);
    let r = qlagrange(dir.path(), &["saddle", &fig3, &c2, "--kind", "minimax"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("verdict=true"));
    assert!((value_after(&r.stdout, "J(greedy uniform) = ") - 5.0 / 3.0).abs() < 1e-12);

    let r = qlagrange(dir.path(), &["saddle", &fig3, &c2, "--kind", "maximin"]);
    assert!(r.stdout.contains("verdict=false"), "{}", r.stdout);

    let qm = write(dir.path(), "qmax.csv", &q_to_csv(&fig3_q_max(), &fig3_elp()));
    let r = qlagrange(
        dir.path(),
        &["saddle", &fig3, qm.to_str().unwrap(), "--kind", "maximin"],
    );
    assert!(r.stdout.contains("verdict=true"), "{}", r.stdout);
    assert_eq!(value_after(&r.stdout, "J(greedy first-index) = "), 2.0);
    assert_eq!(value_after(&r.stdout, "J(greedy uniform) = "), 2.0);
}

#[test]
fn saddle_rejects_mismatched_table() {
    let dir = tempfile::tempdir().unwrap();
    let fig3 = fig3_file(dir.path());
    let short = write(dir.path(), "short.csv", "state,action,value\n0,1,0\n");
    let r = qlagrange(dir.path(), &["saddle", &fig3, short.to_str().unwrap()]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    let extra = write(dir.path(), "extra.csv", "state,action,value\n7,1,0\n");
    let r = qlagrange(dir.path(), &["saddle", &fig3, extra.to_str().unwrap()]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    let junk = write(dir.path(), "junk.csv", "state,action,value\n0,1,abc\n");
    let r = qlagrange(dir.path(), &["saddle", &fig3, junk.to_str().unwrap()]);
    assert_eq!(r.code, 2, "{}", r.stderr);
}

#[test]
fn solved_table_is_a_saddle_point() {
    let dir = tempfile::tempdir().unwrap();
    let fig3 = fig3_file(dir.path());
    assert_eq!(qlagrange(dir.path(), &["solve", &fig3]).code, 0);
    let q = dir.path().join("q_star.csv");
    let r = qlagrange(dir.path(), &["saddle", &fig3, q.to_str().unwrap()]);
    assert!(
        r.stdout.contains("minimax=true") && r.stdout.contains("maximin=true"),
        "{}",
        r.stdout
    );
}

#[test]
fn counterexamples_pass_and_fault_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let r = qlagrange(dir.path(), &["counterexamples"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert!(!r.stdout.contains("FAIL"));
    assert!(r.stdout.contains("V_min = [1.0, 2.0, 2.0, 0.0]"));
    let r = qlagrange(dir.path(), &["counterexamples", "--inject-fault"]);
    assert_ne!(r.code, 0);
    assert!(r.stdout.contains("FAIL"));
}

fn train(dir: &Path, config: &str) -> Run {
    let cfg = write(dir, "exp.json", config);
    qlagrange(dir, &["train", cfg.to_str().unwrap()])
}

#[test]
fn train_fig3_tabular_reaches_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let r = train(
        dir.path(),
        r#"{"task": {"elp": {"path": "builtin:fig3"}}, "model": {"kind": "tabular"},
            "algorithm": "lamin1", "beta": 0.5, "n_updates": 3000, "eval_every": 500}"#,
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(value_after(&r.stdout, "final eval_J = "), 2.0);
    for f in ["run.jsonl", "curve.csv", "model.json"] {
        assert!(dir.path().join(f).exists());
    }
}

const SEQ_CONFIG: &str = r#"{"task": {"seqgen": {"vocab": 4, "transform": "copy", "min_len": 1, "max_len": 3,
        "horizon": 5, "train_pairs": 40, "eval_pairs": 100, "data_seed": 1}},
    "model": {"kind": "mlp", "hidden": 16}, "algorithm": "lamin2", "beta": 1.0,
    "n_updates": 300, "eval_every": 100}"#;

#[test]
fn train_seqgen_writes_curve() {
    let dir = tempfile::tempdir().unwrap();
    let r = train(dir.path(), SEQ_CONFIG);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let curve = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let rows: Vec<&str> = curve.lines().collect();
    assert_eq!(rows[0], "update,eval_J");
    assert!(rows.len() > 1);
    for row in &rows[1..] {
        let rate: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&rate));
    }
}

#[test]
fn train_rerun_is_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(train(dir.path(), SEQ_CONFIG).code, 0);
    let first = fs::read(dir.path().join("curve.csv")).unwrap();
    let model = fs::read(dir.path().join("model.json")).unwrap();
    assert_eq!(train(dir.path(), SEQ_CONFIG).code, 0);
    assert_eq!(fs::read(dir.path().join("curve.csv")).unwrap(), first);
    assert_eq!(fs::read(dir.path().join("model.json")).unwrap(), model);
}

#[test]
fn train_zero_updates_keeps_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let r = train(
        dir.path(),
        r#"{"task": {"elp": {"path": "builtin:fig3"}}, "model": {"kind": "mlp", "hidden": 8, "init_seed": 3},
            "algorithm": "lamin1", "beta": 0.5, "n_updates": 0}"#,
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(
        fs::read_to_string(dir.path().join("curve.csv")).unwrap(),
        "update,eval_J\n"
    );
    let saved: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("model.json")).unwrap()).unwrap();
    let init = serde_json::to_value(qlagrange::io::SavedModel::Mlp(qlagrange::lamin::MlpQModel::new(
        6, 8, 3, 3,
    )))
    .unwrap();
    assert_eq!(saved, init);
}

#[test]
fn train_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let r = train(
        dir.path(),
        r#"{"task": {"elp": {"path": "builtin:fig3"}}, "model": {"kind": "tabular"},
            "algorithm": "lamin1", "beta": 0.5, "learning_rate": 1}"#,
    );
    assert_eq!(r.code, 2);
}

#[test]
fn seqgen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--seed", "7", "seqgen", "--vocab", "5", "--n", "100"];
    let a = qlagrange(dir.path(), &args);
    let b = qlagrange(dir.path(), &args);
    assert_eq!(a.code, 0);
    assert_eq!(a.stdout, b.stdout);
    let lines: Vec<&str> = a.stdout.lines().collect();
    assert_eq!(lines.len(), 100);
    for l in lines {
        let (src, tgt) = l.split_once('\t').unwrap();
        assert_eq!(src, tgt);
        let n = src.split(' ').count();
        assert!((3..=6).contains(&n));
        assert!(src.split(' ').all(|t| ["a", "b", "c", "d", "e"].contains(&t)));
    }
}

#[test]
fn seqgen_reverse_and_file_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rev.tsv");
    let r = qlagrange(
        dir.path(),
        &[
            "seqgen",
            "--transform",
            "reverse",
            "--min-len",
            "3",
            "--max-len",
            "3",
            "--n",
            "50",
            "--emit-demos",
            path.to_str().unwrap(),
        ],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let text = fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().count(), 50);
    for l in text.lines() {
        let (src, tgt) = l.split_once('\t').unwrap();
        let rev: Vec<&str> = src.split(' ').rev().collect();
        assert_eq!(tgt, rev.join(" "));
    }
}

#[test]
fn seqgen_rejects_short_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let r = qlagrange(dir.path(), &["seqgen", "--max-len", "6", "--horizon", "5"]);
    assert_eq!(r.code, 1);
}

#[test]
fn bad_flags_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qlagrange(dir.path(), &["solve"]).code, 2);
    assert_eq!(qlagrange(dir.path(), &["frobnicate"]).code, 2);
}

#[test]
fn invalid_contents_are_domain_failures() {
    let dir = tempfile::tempdir().unwrap();
    let fig3 = fig3_file(dir.path());
    let mut doc: serde_json::Value = serde_json::from_str(&elp_to_json(&fig3_elp())).unwrap();
    doc["transitions"]["1"]["2"] = serde_json::json!({"3": 0.5});
    let bad = write(dir.path(), "bad.json", &doc.to_string());
    assert_eq!(qlagrange(dir.path(), &["solve", bad.to_str().unwrap()]).code, 1);
    let pi = write(dir.path(), "pi.csv", "state,action,probability\n0,1,0.5\n");
    assert_eq!(
        qlagrange(dir.path(), &["duality", &fig3, "--policy", pi.to_str().unwrap()]).code,
        1
    );
    let not_json = write(dir.path(), "x.json", "{");
    assert_eq!(qlagrange(dir.path(), &["solve", not_json.to_str().unwrap()]).code, 2);
}
