//! Study configuration files for `simulate`.
//!
//! ```toml
//! [model]
//! name = "weibull-vs-exp"
//! # theta0 = [1.0]
//! # spread = 1.0
//! # first_group_fraction = 0.5
//!
//! [study]
//! kind = "mse"            # mse | kappa | coverage
//! estimand = "median"
//! ns = [100, 500]
//! deltas = [0.0, 0.5, 1.0]
//! replications = 2000
//! estimators = ["narrow", "wide", "eb"]
//! kappa_method = "gamma-sd"
//! level = 0.9
//!
//! [output]
//! dir = "results"
//! ```
//!
//! The seed is not part of the file; it comes from `--seed`.

use std::fmt;
use std::path::PathBuf;

use misspec_core::mcstudy::{KappaMethod, StudyConfig};
use misspec_core::models::{build_model, ModelOptions};
use toml::{Table, Value};

use crate::failure::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Mse,
    Kappa,
    Coverage,
}

impl StudyKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "mse" => Some(StudyKind::Mse),
            "kappa" => Some(StudyKind::Kappa),
            "coverage" => Some(StudyKind::Coverage),
            _ => None,
        }
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StudyKind::Mse => "mse",
            StudyKind::Kappa => "kappa",
            StudyKind::Coverage => "coverage",
        })
    }
}

#[derive(Debug, Clone)]
pub struct StudyFile {
    pub kind: StudyKind,
    pub study: StudyConfig,
    pub output_dir: Option<PathBuf>,
}

const SECTIONS: [&str; 3] = ["model", "study", "output"];
const MODEL_KEYS: [&str; 4] = ["name", "theta0", "spread", "first_group_fraction"];
const STUDY_KEYS: [&str; 9] = [
    "kind",
    "estimand",
    "ns",
    "deltas",
    "replications",
    "estimators",
    "kappa_method",
    "level",
    "seed",
];
const OUTPUT_KEYS: [&str; 1] = ["dir"];

/// Collects every problem instead of stopping at the first.
struct Checker {
    problems: Vec<String>,
}

impl Checker {
    fn section<'t>(&mut self, root: &'t Table, name: &str, keys: &[&str], required: bool) -> Option<&'t Table> {
        match root.get(name) {
            None => {
                if required {
                    self.problems.push(format!("missing section [{name}]"));
                }
                None
            }
            Some(Value::Table(t)) => {
                for k in t.keys() {
                    if !keys.contains(&k.as_str()) {
                        self.problems.push(format!("[{name}] unknown key '{k}'"));
                    }
                }
                Some(t)
            }
            Some(_) => {
                self.problems.push(format!("'{name}' must be a section"));
                None
            }
        }
    }

    fn string(&mut self, t: Option<&Table>, sec: &str, key: &str, required: bool) -> Option<String> {
        match t.and_then(|t| t.get(key)) {
            None => {
                if required && t.is_some() {
                    self.problems.push(format!("[{sec}] missing key '{key}'"));
                }
                None
            }
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.problems.push(format!("[{sec}] '{key}' must be a string"));
                None
            }
        }
    }

    fn number(&mut self, t: Option<&Table>, sec: &str, key: &str) -> Option<f64> {
        match t.and_then(|t| t.get(key)) {
            None => None,
            Some(Value::Float(x)) => Some(*x),
            Some(Value::Integer(i)) => Some(*i as f64),
            Some(_) => {
                self.problems.push(format!("[{sec}] '{key}' must be a number"));
                None
            }
        }
    }

    fn count(&mut self, t: Option<&Table>, sec: &str, key: &str) -> Option<usize> {
        match t.and_then(|t| t.get(key)) {
            None => None,
            Some(Value::Integer(i)) if *i >= 0 => Some(*i as usize),
            Some(_) => {
                self.problems.push(format!("[{sec}] '{key}' must be a non-negative integer"));
                None
            }
        }
    }

    fn numbers(&mut self, t: Option<&Table>, sec: &str, key: &str) -> Option<Vec<f64>> {
        let v = t.and_then(|t| t.get(key))?;
        let parsed = match v {
            Value::Array(a) => a
                .iter()
                .map(|x| match x {
                    Value::Float(f) => Some(*f),
                    Value::Integer(i) => Some(*i as f64),
                    _ => None,
                })
                .collect::<Option<Vec<f64>>>(),
            _ => None,
        };
        if parsed.is_none() {
            self.problems.push(format!("[{sec}] '{key}' must be an array of numbers"));
        }
        parsed
    }

    fn counts(&mut self, t: Option<&Table>, sec: &str, key: &str, required: bool) -> Option<Vec<usize>> {
        let Some(v) = t.and_then(|t| t.get(key)) else {
            if required && t.is_some() {
                self.problems.push(format!("[{sec}] missing key '{key}'"));
            }
            return None;
        };
        let parsed = match v {
            Value::Array(a) => a
                .iter()
                .map(|x| match x {
                    Value::Integer(i) if *i > 0 => Some(*i as usize),
                    _ => None,
                })
                .collect::<Option<Vec<usize>>>(),
            _ => None,
        };
        if parsed.is_none() {
            self.problems.push(format!("[{sec}] '{key}' must be an array of positive integers"));
        }
        parsed
    }

    fn strings(&mut self, t: Option<&Table>, sec: &str, key: &str) -> Option<Vec<String>> {
        let v = t.and_then(|t| t.get(key))?;
        let parsed = match v {
            Value::Array(a) => a
                .iter()
                .map(|x| x.as_str().map(str::to_string))
                .collect::<Option<Vec<String>>>(),
            _ => None,
        };
        if parsed.is_none() {
            self.problems.push(format!("[{sec}] '{key}' must be an array of strings"));
        }
        parsed
    }
}

/// Parse and validate a study file. On failure the message lists every
/// problem found, one per line.
pub fn parse_study(text: &str, seed: u64) -> Result<StudyFile, Failure> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Failure::usage(format!("config is not valid TOML: {e}")))?;
    let mut c = Checker { problems: Vec::new() };
    for k in root.keys() {
        if !SECTIONS.contains(&k.as_str()) {
            c.problems.push(format!("unknown section or key '{k}'"));
        }
    }
    let model = c.section(&root, "model", &MODEL_KEYS, true);
    let study = c.section(&root, "study", &STUDY_KEYS, true);
    let output = c.section(&root, "output", &OUTPUT_KEYS, false);

    let name = c.string(model, "model", "name", true);
    let options = ModelOptions {
        theta0: c.numbers(model, "model", "theta0"),
        spread: c.number(model, "model", "spread"),
        first_group_fraction: c.number(model, "model", "first_group_fraction"),
    };

    let kind_name = c.string(study, "study", "kind", true);
    let kind = kind_name.as_deref().and_then(|k| {
        let parsed = StudyKind::parse(k);
        if parsed.is_none() {
            c.problems
                .push(format!("[study] kind '{k}' is not one of mse, kappa, coverage"));
        }
        parsed
    });
    if study.is_some_and(|s| s.contains_key("seed")) {
        c.problems
            .push("[study] 'seed' is not read from the file; pass --seed instead".into());
    }
    let estimand = c.string(study, "study", "estimand", kind != Some(StudyKind::Kappa));
    let ns = c.counts(study, "study", "ns", true);
    let deltas = c.numbers(study, "study", "deltas");
    let replications = c.count(study, "study", "replications");
    let estimators = c.strings(study, "study", "estimators");
    let kappa_method = c.string(study, "study", "kappa_method", false).and_then(|m| {
        KappaMethod::parse(&m)
            .map_err(|_| {
                c.problems.push(format!(
                    "[study] kappa_method '{m}' is not one of score-cov, full-ml-cov, gamma-sd"
                ))
            })
            .ok()
    });
    let level = c.number(study, "study", "level");
    let dir = c.string(output, "output", "dir", false);

    // A kappa study needs no estimand; use the model's first so the shared
    // checks still run.
    let estimand = estimand.or_else(|| {
        let m = build_model(name.as_deref()?, &options).ok()?;
        m.estimands().first().map(|e| e.name.clone())
    });

    let mut cfg = StudyConfig::new(name.as_deref().unwrap_or(""), estimand.as_deref().unwrap_or(""), seed);
    cfg.options = options;
    if let Some(v) = ns {
        cfg.ns = v;
    }
    if let Some(v) = deltas {
        cfg.deltas = v;
    }
    if let Some(v) = replications {
        cfg.replications = v;
    }
    if let Some(v) = estimators {
        cfg.estimators = v;
    }
    if let Some(v) = kappa_method {
        cfg.kappa_method = v;
    }
    if let Some(v) = level {
        cfg.level = v;
    }
    if name.is_some() && (estimand.is_some() || kind == Some(StudyKind::Kappa)) {
        c.problems.extend(cfg.problems());
    }
    match (c.problems.is_empty(), kind) {
        (true, Some(kind)) => Ok(StudyFile {
            kind,
            study: cfg,
            output_dir: dir.map(PathBuf::from),
        }),
        _ => {
            let mut msg = format!("config has {} problem(s):", c.problems.len());
            for p in &c.problems {
                msg.push_str("\n  - ");
                msg.push_str(p);
            }
            Err(Failure::usage(msg))
        }
    }
}
