//! End-to-end runs: dataset, training, traditional and whole-space metrics.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use thiserror::Error;

use crate::cnf::emit_dimacs;
use crate::counter::{CountMode, DEFAULT_TIMEOUT};
use crate::dataset::{make_balanced, make_ratio, positive_formula, split, DatasetError, SplitRatio};
use crate::dtree::{eval_traditional, train_cart, TraditionalMetrics, TrainParams};
use crate::metrics::{acc_mc, MetricsError};
use crate::props::{PropertyId, PropertySpec};
use crate::tree2cnf::side_cnf;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("config key '{key}': {msg}")]
    Value { key: String, msg: String },
    #[error("missing config key '{0}'")]
    Missing(&'static str),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Counter selection as written in configs and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterKind {
    Exact,
    Brute,
    Approx,
}

impl FromStr for CounterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(CounterKind::Exact),
            "brute" => Ok(CounterKind::Brute),
            "approx" | "approximate" => Ok(CounterKind::Approx),
            other => Err(format!("unknown counter '{other}' (exact, brute, approx)")),
        }
    }
}

impl CounterKind {
    pub fn name(self) -> &'static str {
        match self {
            CounterKind::Exact => "exact",
            CounterKind::Brute => "brute",
            CounterKind::Approx => "approx",
        }
    }

    pub fn mode(self, epsilon: f64, delta: f64, seed: u64) -> CountMode {
        match self {
            CounterKind::Exact => CountMode::Exact,
            CounterKind::Brute => CountMode::Brute,
            CounterKind::Approx => CountMode::Approx { epsilon, delta, seed },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub property: PropertyId,
    pub scope: usize,
    pub symbreak: bool,
    pub ratio: SplitRatio,
    /// Percentage of positives; None for a balanced dataset.
    pub class_ratio: Option<u32>,
    /// Dataset size when `class_ratio` is set.
    pub total: Option<usize>,
    pub seed: u64,
    pub counter: CounterKind,
    pub epsilon: f64,
    pub delta: f64,
    pub timeout_seconds: u64,
    pub max_depth: Option<usize>,
}

/// Dataset size for class-ratio runs when `total` is unset.
pub const DEFAULT_RATIO_TOTAL: usize = 20_000;

const KEYS: &[&str] = &[
    "property",
    "scope",
    "symbreak",
    "ratio",
    "class_ratio",
    "total",
    "seed",
    "counter",
    "epsilon",
    "delta",
    "timeout_seconds",
    "max_depth",
];

impl ExperimentConfig {
    pub fn new(property: PropertyId, scope: usize) -> Self {
        ExperimentConfig {
            property,
            scope,
            symbreak: false,
            ratio: SplitRatio::new(75, 25).expect("valid"),
            class_ratio: None,
            total: None,
            seed: 0,
            counter: CounterKind::Exact,
            epsilon: 0.8,
            delta: 0.2,
            timeout_seconds: DEFAULT_TIMEOUT.as_secs(),
            max_depth: None,
        }
    }

    /// Parses `key=value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ExperimentError::Syntax {
                line: i + 1,
                msg: format!("expected key=value, got '{line}'"),
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Self::from_pairs(&pairs)
    }

    /// Builds a config from key/value pairs; later pairs override earlier ones.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self, ExperimentError> {
        let find = |key: &str| pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let property = find("property").ok_or(ExperimentError::Missing("property"))?;
        let property = property.parse::<PropertyId>().map_err(|e| value_err("property", e))?;
        let scope = find("scope").ok_or(ExperimentError::Missing("scope"))?;
        let scope = scope.parse().map_err(|e| value_err("scope", e))?;
        let mut c = ExperimentConfig::new(property, scope);
        for (k, v) in pairs {
            c.set(k, v)?;
        }
        PropertySpec::new(c.property, c.scope).map_err(|e| value_err("scope", e))?;
        Ok(c)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ExperimentError> {
        let opt = |v: &str| v.is_empty() || v.eq_ignore_ascii_case("none");
        match key {
            "property" => self.property = v.parse().map_err(|e| value_err(key, e))?,
            "scope" => self.scope = v.parse().map_err(|e| value_err(key, e))?,
            "symbreak" => self.symbreak = v.parse().map_err(|e| value_err(key, e))?,
            "ratio" => self.ratio = v.parse().map_err(|e| value_err(key, e))?,
            "class_ratio" if opt(v) => self.class_ratio = None,
            "class_ratio" => {
                let p: u32 = v.trim_end_matches('%').parse().map_err(|e| value_err(key, e))?;
                if p > 100 {
                    return Err(value_err(key, "must be a percentage"));
                }
                self.class_ratio = Some(p);
            }
            "total" if opt(v) => self.total = None,
            "total" => self.total = Some(v.parse().map_err(|e| value_err(key, e))?),
            "seed" => self.seed = v.parse().map_err(|e| value_err(key, e))?,
            "counter" => self.counter = v.parse().map_err(|e: String| value_err(key, e))?,
            "epsilon" => {
                self.epsilon = v.parse().map_err(|e| value_err(key, e))?;
                if self.epsilon.is_nan() || self.epsilon <= 0.0 {
                    return Err(value_err(key, "must be positive"));
                }
            }
            "delta" => {
                self.delta = v.parse().map_err(|e| value_err(key, e))?;
                if !(self.delta > 0.0 && self.delta < 1.0) {
                    return Err(value_err(key, "must lie in (0, 1)"));
                }
            }
            "timeout_seconds" => self.timeout_seconds = v.parse().map_err(|e| value_err(key, e))?,
            "max_depth" if opt(v) => self.max_depth = None,
            "max_depth" => {
                let d: usize = v.parse().map_err(|e| value_err(key, e))?;
                if d == 0 {
                    return Err(value_err(key, "must be at least 1"));
                }
                self.max_depth = Some(d);
            }
            _ => return Err(value_err(key, format!("unknown key (known: {})", KEYS.join(", ")))),
        }
        Ok(())
    }

    pub fn spec(&self) -> PropertySpec {
        PropertySpec::new(self.property, self.scope).expect("validated")
    }

    pub fn mode(&self) -> CountMode {
        self.counter.mode(self.epsilon, self.delta, self.seed)
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_seconds)
    }

    /// Canonical `key=value` text; parses back to the same config.
    pub fn to_kv(&self) -> String {
        let opt = |o: Option<String>| o.unwrap_or_else(|| "none".into());
        let mut s = String::new();
        let _ = writeln!(s, "property={}", self.property.name());
        let _ = writeln!(s, "scope={}", self.scope);
        let _ = writeln!(s, "symbreak={}", self.symbreak);
        let _ = writeln!(s, "ratio={}", self.ratio);
        let _ = writeln!(s, "class_ratio={}", opt(self.class_ratio.map(|p| p.to_string())));
        let _ = writeln!(s, "total={}", opt(self.total.map(|t| t.to_string())));
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "counter={}", self.counter.name());
        let _ = writeln!(s, "epsilon={}", self.epsilon);
        let _ = writeln!(s, "delta={}", self.delta);
        let _ = writeln!(s, "timeout_seconds={}", self.timeout_seconds);
        let _ = writeln!(s, "max_depth={}", opt(self.max_depth.map(|d| d.to_string())));
        s
    }

    pub fn to_json(&self) -> Value {
        json!({
            "property": self.property.name(),
            "scope": self.scope,
            "symbreak": self.symbreak,
            "ratio": self.ratio.to_string(),
            "class_ratio": self.class_ratio,
            "total": self.total,
            "seed": self.seed,
            "counter": self.counter.name(),
            "epsilon": self.epsilon,
            "delta": self.delta,
            "timeout_seconds": self.timeout_seconds,
            "max_depth": self.max_depth,
        })
    }
}

fn value_err(key: &str, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Value { key: key.to_string(), msg: e.to_string() }
}

pub fn traditional_json(m: &TraditionalMetrics) -> Value {
    json!({
        "counts": { "tp": m.tp, "fp": m.fp, "tn": m.tn, "fn": m.fn_ },
        "scores": m.scores().to_json(),
    })
}

/// Outcome of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    /// Deterministic report, written to `report.json`.
    pub report: Value,
    /// Wall times per stage, written to `timings.json`.
    pub timings: Value,
    /// First failing stage, if any.
    pub error: Option<String>,
    /// Whether that stage failed by running out of time.
    pub timed_out: bool,
}

struct Stages {
    times: serde_json::Map<String, Value>,
}

impl Stages {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.times.insert(name.to_string(), json!(start.elapsed().as_secs_f64()));
        out
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), ExperimentError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| ExperimentError::Io { path, source })
}

/// Runs every stage and writes its artifacts into `out_dir`. A failing
/// stage is recorded in the report and later stages are skipped.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport, ExperimentError> {
    fs::create_dir_all(out_dir).map_err(|source| ExperimentError::Io { path: out_dir.to_path_buf(), source })?;
    write(out_dir, "config.txt", &config.to_kv())?;
    let mut stages = Stages { times: serde_json::Map::new() };
    let mut report = json!({ "config": config.to_json() });
    let deadline = Instant::now() + config.timeout();
    let remaining = || deadline.saturating_duration_since(Instant::now());
    let spec = config.spec();
    let mut timed_out = false;

    let outcome = (|| -> Result<(), (String, String)> {
        let ds = stages
            .time("dataset", || match config.class_ratio {
                None => make_balanced(spec, config.symbreak, config.seed, remaining()),
                Some(p) => {
                    let total = config.total.unwrap_or(DEFAULT_RATIO_TOTAL);
                    make_ratio(spec, config.symbreak, p, total, config.seed, remaining())
                }
            })
            .map_err(|e| {
                timed_out = matches!(e, DatasetError::Enumeration { .. });
                ("dataset".to_string(), e.to_string())
            })?;
        write(out_dir, "dataset.csv", &ds.to_csv()).map_err(|e| ("dataset".into(), e.to_string()))?;
        write(out_dir, "dataset.meta", &ds.meta()).map_err(|e| ("dataset".into(), e.to_string()))?;
        let (train, test) = split(&ds, config.ratio, config.seed).map_err(|e| ("split".to_string(), e.to_string()))?;
        report["dataset"] = json!({
            "samples": ds.len(),
            "positives": ds.positives(),
            "negatives": ds.negatives(),
            "train": train.len(),
            "test": test.len(),
        });

        let params = TrainParams { max_depth: config.max_depth, ..TrainParams::default() };
        let tree =
            stages.time("train", || train_cart(&train, params)).map_err(|e| ("train".to_string(), e.to_string()))?;
        write(out_dir, "tree.json", &tree.to_json()).map_err(|e| ("train".into(), e.to_string()))?;
        write(out_dir, "tree_true.cnf", &emit_dimacs(&side_cnf(&tree, true)))
            .map_err(|e| ("tree2cnf".into(), e.to_string()))?;
        write(out_dir, "tree_false.cnf", &emit_dimacs(&side_cnf(&tree, false)))
            .map_err(|e| ("tree2cnf".into(), e.to_string()))?;
        report["tree"] = json!({ "nodes": tree.num_nodes(), "leaves": tree.num_leaves(), "depth": tree.depth() });

        let tr = eval_traditional(&tree, &train).map_err(|e| ("traditional".to_string(), e.to_string()))?;
        let te = eval_traditional(&tree, &test).map_err(|e| ("traditional".to_string(), e.to_string()))?;
        report["traditional"] = json!({ "train": traditional_json(&tr), "test": traditional_json(&te) });

        let phi = positive_formula(spec, config.symbreak);
        let counts = stages.time("mcml", || acc_mc(&phi, &tree, config.mode(), remaining())).map_err(|e| {
            timed_out = matches!(e, MetricsError::Partial { .. });
            ("mcml".to_string(), e.to_string())
        })?;
        report["mcml"] = counts.to_json(false);
        stages.times.insert("mcml_counts".into(), counts.to_json(true)["seconds"].clone());
        Ok(())
    })();

    let error = match outcome {
        Ok(()) => None,
        Err((stage, msg)) => {
            report["error"] = json!({ "stage": stage, "message": msg });
            Some(format!("{stage}: {msg}"))
        }
    };
    let timings = Value::Object(stages.times);
    write(out_dir, "report.json", &(serde_json::to_string_pretty(&report).expect("json") + "\n"))?;
    write(out_dir, "timings.json", &(serde_json::to_string_pretty(&timings).expect("json") + "\n"))?;
    Ok(ExperimentReport { report, timings, error, timed_out })
}

/// Human-readable summary of a report.
pub fn format_report(report: &Value) -> String {
    let mut s = String::new();
    let cfg = &report["config"];
    let _ = writeln!(
        s,
        "{}({}) symbreak={} split={} counter={}",
        cfg["property"].as_str().unwrap_or("?"),
        cfg["scope"],
        cfg["symbreak"],
        cfg["ratio"].as_str().unwrap_or("?"),
        cfg["counter"].as_str().unwrap_or("?")
    );
    if let Some(ds) = report.get("dataset") {
        let _ = writeln!(s, "dataset: {} samples ({} train, {} test)", ds["samples"], ds["train"], ds["test"]);
    }
    let _ = writeln!(s, "{:<10} {:>9} {:>9} {:>9} {:>9}", "", "accuracy", "precision", "recall", "f1");
    let row = |s: &mut String, name: &str, scores: &Value| {
        let g = |k: &str| scores[k].as_str().unwrap_or("-").to_string();
        let _ =
            writeln!(s, "{:<10} {:>9} {:>9} {:>9} {:>9}", name, g("accuracy"), g("precision"), g("recall"), g("f1"));
    };
    if let Some(t) = report.get("traditional") {
        row(&mut s, "test", &t["test"]["scores"]);
    }
    if let Some(m) = report.get("mcml") {
        row(&mut s, "phi", &m["scores"]);
    }
    if let Some(e) = report.get("error") {
        let _ = writeln!(s, "error in stage {}: {}", e["stage"], e["message"].as_str().unwrap_or(""));
    }
    s
}

/// Convenience for callers that only need the score strings.
pub fn score(report: &Value, section: &str, metric: &str) -> Option<f64> {
    let v = match section {
        "test" => &report["traditional"]["test"]["scores"][metric],
        _ => &report[section]["scores"][metric],
    };
    v.as_str()?.parse().ok()
}
