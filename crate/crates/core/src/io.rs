//! File formats: ELP documents (JSON), Q-tables, policies, multipliers and
//! discount vectors (CSV), and trained models (JSON).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::bellman::{DiscountFn, TabularQ};
use crate::elp::{EpisodicProcess, Policy, STOCHASTIC_TOL};
use crate::error::{Error, Result};
use crate::lagrangian::{fig3_elp, Multiplier};
use crate::lamin::{MlpQModel, TabularQModel};

/// Largest row-sum deviation the strict loader silently repairs.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// On-disk ELP layout. Maps are keyed by names; absent entries are zero and
/// absent terminal rows default to the reset distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElpDocument {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub terminal: Vec<String>,
    pub start_state: String,
    pub reset: IndexMap<String, f64>,
    #[serde(default)]
    pub rewards: IndexMap<String, f64>,
    pub transitions: IndexMap<String, IndexMap<String, IndexMap<String, f64>>>,
}

impl ElpDocument {
    pub fn from_process(p: &EpisodicProcess) -> Self {
        let sn = p.state_names();
        let an = p.action_names();
        let sparse = |row: &[f64]| -> IndexMap<String, f64> {
            row.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (sn[i].clone(), *v))
                .collect()
        };
        let mut transitions = IndexMap::new();
        for s in 0..p.n_states() {
            let mut by_action = IndexMap::new();
            for a in 0..p.n_actions() {
                if p.is_terminal(s) && p.row(s, a) == p.reset_dist() {
                    continue;
                }
                by_action.insert(an[a].clone(), sparse(p.row(s, a)));
            }
            if !by_action.is_empty() {
                transitions.insert(sn[s].clone(), by_action);
            }
        }
        ElpDocument {
            states: sn.to_vec(),
            actions: an.to_vec(),
            terminal: p.terminal_states().map(|s| sn[s].clone()).collect(),
            start_state: sn[p.start_state()].clone(),
            reset: sparse(p.reset_dist()),
            rewards: sparse(p.rewards()),
            transitions,
        }
    }

    /// Builds the process as written, without any stochasticity repair.
    pub fn to_process_raw(&self, path: &Path) -> Result<EpisodicProcess> {
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            msg,
        };
        let n = self.states.len();
        let state = |name: &str| {
            self.states
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| err(format!("unknown state `{name}`")))
        };
        let action = |name: &str| {
            self.actions
                .iter()
                .position(|a| a == name)
                .ok_or_else(|| err(format!("unknown action `{name}`")))
        };
        let dense = |map: &IndexMap<String, f64>| -> Result<Vec<f64>> {
            let mut v = vec![0.0; n];
            for (k, p) in map {
                v[state(k)?] += p;
            }
            Ok(v)
        };
        for names in [&self.states, &self.actions] {
            let mut sorted = names.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != names.len() {
                return Err(err("duplicate state or action name".into()));
            }
        }
        let mut b = EpisodicProcess::builder(n, self.actions.len())
            .state_names(self.states.iter().cloned())
            .action_names(self.actions.iter().cloned())
            .reset(dense(&self.reset)?)
            .rewards(dense(&self.rewards)?)
            .start(state(&self.start_state)?);
        for t in &self.terminal {
            b = b.terminal(state(t)?);
        }
        for (s, by_action) in &self.transitions {
            let si = state(s)?;
            for (a, row) in by_action {
                b = b.transition(si, action(a)?, dense(row)?);
            }
        }
        b.build().map_err(|e| err(e.to_string()))
    }

    /// Like [`to_process_raw`](Self::to_process_raw), but rows and the reset
    /// distribution off by at most [`RENORMALIZE_TOL`] are rescaled and larger
    /// deviations are errors.
    pub fn to_process(&self, path: &Path) -> Result<EpisodicProcess> {
        let raw = self.to_process_raw(path)?;
        let fix = |row: &[f64], what: String| -> Result<Vec<f64>> {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| *p < 0.0 || !p.is_finite()) || (sum - 1.0).abs() > RENORMALIZE_TOL {
                // well-formed but invalid content is a domain failure, as in `validate`
                return Err(Error::Precondition(format!(
                    "{}: {what} is not a probability distribution (sum {sum})",
                    path.display()
                )));
            }
            // rows that already pass the in-memory check are kept bit-for-bit
            Ok(if (sum - 1.0).abs() <= STOCHASTIC_TOL {
                row.to_vec()
            } else {
                row.iter().map(|p| p / sum).collect()
            })
        };
        let reset = fix(raw.reset_dist(), "reset distribution".into())?;
        let names = raw.state_names();
        let anames = raw.action_names();
        let mut b = EpisodicProcess::builder(raw.n_states(), raw.n_actions())
            .state_names(names.iter().cloned())
            .action_names(anames.iter().cloned())
            .reset(reset.clone())
            .rewards(raw.rewards().to_vec())
            .start(raw.start_state());
        for s in 0..raw.n_states() {
            if raw.is_terminal(s) {
                b = b.terminal(s);
            }
            for a in 0..raw.n_actions() {
                let row = if raw.is_terminal(s) && raw.row(s, a) == raw.reset_dist() {
                    reset.clone()
                } else {
                    fix(raw.row(s, a), format!("row ({}, {})", names[s], anames[a]))?
                };
                b = b.transition(s, a, row);
            }
        }
        b.build()
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Name of the built-in process, for arguments of the form `builtin:NAME`.
pub fn builtin_elp(name: &str) -> Option<EpisodicProcess> {
    match name {
        "fig3" => Some(fig3_elp()),
        _ => None,
    }
}

fn parse_document(spec: &str) -> Result<(ElpDocument, PathBuf)> {
    let path = PathBuf::from(spec);
    if let Some(name) = spec.strip_prefix("builtin:") {
        let p = builtin_elp(name).ok_or_else(|| Error::Parse {
            path: path.clone(),
            msg: format!("no built-in process named `{name}`"),
        })?;
        return Ok((ElpDocument::from_process(&p), path));
    }
    let doc = serde_json::from_str(&read(&path)?).map_err(|e| Error::Parse {
        path: path.clone(),
        msg: e.to_string(),
    })?;
    Ok((doc, path))
}

/// Loads a file path or `builtin:NAME`, repairing tiny stochasticity errors.
pub fn load_elp(spec: &str) -> Result<EpisodicProcess> {
    let (doc, path) = parse_document(spec)?;
    doc.to_process(&path)
}

/// Loads without repairs, for reporting every violation as written.
pub fn load_elp_raw(spec: &str) -> Result<EpisodicProcess> {
    let (doc, path) = parse_document(spec)?;
    doc.to_process_raw(&path)
}

pub fn elp_to_json(p: &EpisodicProcess) -> String {
    serde_json::to_string_pretty(&ElpDocument::from_process(p)).expect("document serializes")
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn csv_reader(path: &Path, text: &str) -> csv::Reader<std::io::Cursor<Vec<u8>>> {
    let _ = path;
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(std::io::Cursor::new(text.as_bytes().to_vec()))
}

/// Reads `(state, action, number)` records, resolving names against the process.
fn read_pairs(path: &Path, p: &EpisodicProcess, header: [&str; 3]) -> Result<Vec<(usize, usize, f64, usize)>> {
    let text = read(path)?;
    let mut rdr = csv_reader(path, &text);
    let perr = |line: usize, msg: String| Error::ParseLine {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let got = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
    if got.iter().collect::<Vec<_>>() != header {
        return Err(perr(1, format!("expected header `{}`", header.join(","))));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| perr(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 3 {
            return Err(perr(line, "expected three fields".into()));
        }
        // names outside the process are a shape mismatch, not a syntax error
        let derr = |what: &str, name: &str| Error::dim(format!("{}:{line}: unknown {what} `{name}`", path.display()));
        let s = p.state_index(&rec[0]).ok_or_else(|| derr("state", &rec[0]))?;
        let a = p.action_index(&rec[1]).ok_or_else(|| derr("action", &rec[1]))?;
        let v: f64 = rec[2]
            .parse()
            .map_err(|_| perr(line, format!("bad number `{}`", &rec[2])))?;
        if !v.is_finite() {
            return Err(perr(line, "non-finite value".into()));
        }
        out.push((s, a, v, line));
    }
    Ok(out)
}

/// Q-table CSV `state,action,value`; every pair exactly once.
pub fn read_q_csv(path: &Path, p: &EpisodicProcess) -> Result<TabularQ> {
    let (n, m) = (p.n_states(), p.n_actions());
    let mut values = vec![None; n * m];
    for (s, a, v, line) in read_pairs(path, p, ["state", "action", "value"])? {
        if values[s * m + a].replace(v).is_some() {
            return Err(Error::ParseLine {
                path: path.to_path_buf(),
                line,
                msg: "duplicate state-action pair".into(),
            });
        }
    }
    if let Some(i) = values.iter().position(Option::is_none) {
        return Err(Error::dim(format!(
            "{}: missing value for ({}, {})",
            path.display(),
            p.state_names()[i / m],
            p.action_names()[i % m]
        )));
    }
    TabularQ::new(n, m, values.into_iter().map(Option::unwrap).collect())
}

pub fn q_to_csv(q: &TabularQ, p: &EpisodicProcess) -> String {
    let mut out = String::from("state,action,value\n");
    for s in 0..q.n_states() {
        for a in 0..q.n_actions() {
            out.push_str(&format!(
                "{},{},{}\n",
                p.state_names()[s],
                p.action_names()[a],
                q.get(s, a)
            ));
        }
    }
    out
}

fn sparse_table(path: &Path, p: &EpisodicProcess, header: [&str; 3]) -> Result<Vec<f64>> {
    let m = p.n_actions();
    let mut values = vec![0.0; p.n_states() * m];
    let mut seen = vec![false; values.len()];
    for (s, a, v, line) in read_pairs(path, p, header)? {
        if std::mem::replace(&mut seen[s * m + a], true) {
            return Err(Error::ParseLine {
                path: path.to_path_buf(),
                line,
                msg: "duplicate state-action pair".into(),
            });
        }
        values[s * m + a] = v;
    }
    Ok(values)
}

/// Policy CSV `state,action,probability`; omitted pairs have probability zero.
pub fn read_policy_csv(path: &Path, p: &EpisodicProcess) -> Result<Policy> {
    let probs = sparse_table(path, p, ["state", "action", "probability"])?;
    Policy::new(p.n_states(), p.n_actions(), probs).map_err(|e| Error::Precondition(format!("{}: {e}", path.display())))
}

pub fn policy_to_csv(pi: &Policy, p: &EpisodicProcess) -> String {
    let mut out = String::from("state,action,probability\n");
    for s in 0..pi.n_states() {
        for a in 0..pi.n_actions() {
            if pi.prob(s, a) != 0.0 {
                out.push_str(&format!(
                    "{},{},{}\n",
                    p.state_names()[s],
                    p.action_names()[a],
                    pi.prob(s, a)
                ));
            }
        }
    }
    out
}

/// Multiplier CSV `state,action,weight`; omitted pairs have weight zero.
pub fn read_multiplier_csv(path: &Path, p: &EpisodicProcess) -> Result<Multiplier> {
    let w = sparse_table(path, p, ["state", "action", "weight"])?;
    Multiplier::new(p.n_states(), p.n_actions(), w).map_err(|e| Error::Precondition(format!("{}: {e}", path.display())))
}

pub fn multiplier_to_csv(lam: &Multiplier, p: &EpisodicProcess) -> String {
    let mut out = String::from("state,action,weight\n");
    for s in 0..lam.n_states() {
        for a in 0..lam.n_actions() {
            out.push_str(&format!(
                "{},{},{}\n",
                p.state_names()[s],
                p.action_names()[a],
                lam.get(s, a)
            ));
        }
    }
    out
}

/// Discount CSV `state,gamma` covering every state once.
pub fn read_gamma_csv(path: &Path, p: &EpisodicProcess) -> Result<DiscountFn> {
    let text = read(path)?;
    let mut rdr = csv_reader(path, &text);
    let perr = |line: usize, msg: String| Error::ParseLine {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let hdr = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
    if hdr.iter().collect::<Vec<_>>() != ["state", "gamma"] {
        return Err(perr(1, "expected header `state,gamma`".into()));
    }
    let mut gamma = vec![None; p.n_states()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| perr(e.position().map_or(0, |q| q.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |q| q.line() as usize);
        let name = rec.get(0).unwrap_or("");
        let s = p
            .state_index(name)
            .ok_or_else(|| Error::dim(format!("{}:{line}: unknown state `{name}`", path.display())))?;
        let g: f64 = rec
            .get(1)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| perr(line, "bad discount value".into()))?;
        if gamma[s].replace(g).is_some() {
            return Err(perr(line, "duplicate state".into()));
        }
    }
    let gamma: Option<Vec<f64>> = gamma.into_iter().collect();
    let gamma = gamma.ok_or_else(|| Error::dim(format!("{}: every state needs a discount", path.display())))?;
    DiscountFn::new(gamma)
}

/// A trained model as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    Tabular(TabularQModel),
    Mlp(MlpQModel),
}

pub fn read_model(path: &Path) -> Result<SavedModel> {
    serde_json::from_str(&read(path)?).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}
