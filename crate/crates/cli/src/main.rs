//! `relcount` command-line tool.
//!
//! Every command prints a human-readable table on stdout, or the JSON report
//! with `--json`; `--report FILE` also writes the JSON report to a file.
//! Exit codes: 2 usage, 3 timeout, 4 data.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use relcount::cnf::{emit_dimacs, parse_dimacs, CnfFormula};
use relcount::counter::{count_approx, count_bruteforce, count_exact, CountError, CountMode, CountResult};
use relcount::dataset::{make_balanced, make_ratio, positive_formula, split, Dataset, DatasetError, SplitRatio};
use relcount::dtree::{eval_traditional, train_cart, DecisionTree, TrainParams};
use relcount::experiment::{format_report, run_experiment, traditional_json, CounterKind, ExperimentConfig};
use relcount::metrics::{acc_mc, diff_mc, format_decimal, format_scientific, MetricsError};
use relcount::props::{encode, lex_leader_symbreak, PropError, PropertyId, PropertySpec};
use relcount::tree2cnf::{paths, side_cnf_from};
use serde_json::{json, Value};
use thiserror::Error;

const TREE_FORMAT: u32 = 1;
const DATASET_FORMAT: u32 = 1;
const REPORT_FORMAT: u32 = 1;

fn long_version() -> &'static str {
    Box::leak(
        format!(
            "{}\nformats: dimacs (p cnf, c ind projection), tree-json v{TREE_FORMAT}, dataset-csv v{DATASET_FORMAT}, report-json v{REPORT_FORMAT}",
            env!("CARGO_PKG_VERSION")
        )
        .into_boxed_str(),
    )
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Timeout(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Timeout(_) => 3,
            CliError::Data(_) => 4,
        }
    }
}

impl From<PropError> for CliError {
    fn from(e: PropError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Enumeration { .. } => CliError::Timeout(e.to_string()),
            DatasetError::Ratio(_) => CliError::Usage(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<CountError> for CliError {
    fn from(e: CountError) -> Self {
        match e {
            CountError::TooLarge { .. } => CliError::Data(e.to_string()),
            e => CliError::Usage(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Partial { .. } => CliError::Timeout(e.to_string()),
            MetricsError::Count(c) => c.into(),
            e => CliError::Data(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "relcount", version, long_version = long_version(), about = "Model counting for relational properties and decision trees")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Seed for every random choice [default: 0].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the JSON report instead of the table.
    #[arg(long, global = true)]
    json: bool,
    /// Also write the JSON report to this file.
    #[arg(long, global = true, value_name = "FILE")]
    report: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct Property {
    #[arg(long)]
    property: PropertyId,
    #[arg(long)]
    scope: usize,
    /// Conjoin the lex-leader symmetry breaker.
    #[arg(long)]
    symbreak: bool,
}

impl Property {
    fn spec(&self) -> Result<PropertySpec> {
        Ok(PropertySpec::new(self.property, self.scope)?)
    }

    fn json(&self) -> Value {
        json!({ "property": self.property.name(), "scope": self.scope, "symbreak": self.symbreak })
    }
}

#[derive(Args, Clone)]
struct Counting {
    #[arg(long, default_value = "exact")]
    mode: CounterKind,
    #[arg(long, default_value_t = 0.8)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    /// Time budget in seconds.
    #[arg(long, default_value_t = 5000)]
    timeout: u64,
}

impl Counting {
    fn mode(&self, seed: u64) -> CountMode {
        self.mode.mode(self.epsilon, self.delta, seed)
    }

    fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout)
    }

    fn json(&self, seed: u64) -> Value {
        json!({
            "mode": self.mode.name(),
            "epsilon": self.epsilon,
            "delta": self.delta,
            "timeout_seconds": self.timeout,
            "seed": seed,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the CNF encoding of a property.
    Encode {
        #[command(flatten)]
        property: Property,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count the projected models of a DIMACS file.
    Count {
        cnf: PathBuf,
        #[command(flatten)]
        counting: Counting,
        /// Largest projection the brute-force counter accepts.
        #[arg(long, default_value_t = relcount::counter::DEFAULT_BRUTE_LIMIT)]
        brute_limit: usize,
    },
    /// Generate a labelled dataset (CSV plus `.meta` sidecar).
    Gen {
        #[command(flatten)]
        property: Property,
        /// Percentage of positives; balanced when absent.
        #[arg(long)]
        class_ratio: Option<u32>,
        /// Dataset size with `--class-ratio`.
        #[arg(long, default_value_t = relcount::experiment::DEFAULT_RATIO_TOTAL)]
        total: usize,
        #[arg(long, default_value_t = 5000)]
        timeout: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a dataset, train a tree and score it on the held-out part.
    Train {
        dataset: PathBuf,
        #[arg(long, default_value = "75:25")]
        ratio: SplitRatio,
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the CNF of each side of a tree.
    Tree2cnf {
        tree: PathBuf,
        /// Output directory for `tree_true.cnf` and `tree_false.cnf`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Whole-space confusion counts of a tree against a property.
    Accmc {
        #[arg(long)]
        tree: PathBuf,
        #[command(flatten)]
        property: Property,
        #[command(flatten)]
        counting: Counting,
    },
    /// Whole-space disagreement between two trees.
    Diffmc {
        first: PathBuf,
        second: PathBuf,
        #[command(flatten)]
        counting: Counting,
    },
    /// Run one full experiment into a report directory.
    Experiment {
        /// `key=value` config file; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override as `key=value`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        property: Option<PropertyId>,
        #[arg(long)]
        scope: Option<usize>,
        #[arg(long)]
        counter: Option<CounterKind>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Output of one command: its report plus the table shown to people.
struct Outcome {
    report: Value,
    table: Vec<(String, String)>,
    /// Error to surface after the report is written.
    error: Option<CliError>,
}

impl Outcome {
    fn new(command: &str, config: Value) -> Self {
        Outcome {
            report: json!({ "command": command, "report_format": REPORT_FORMAT, "config": config }),
            table: Vec::new(),
            error: None,
        }
    }

    fn row(&mut self, key: &str, value: impl ToString) {
        self.table.push((key.to_string(), value.to_string()));
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_cnf(path: &Path) -> Result<CnfFormula> {
    parse_dimacs(&read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_tree(path: &Path) -> Result<DecisionTree> {
    DecisionTree::from_json(&read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta")
}

fn formula(p: &Property) -> Result<CnfFormula> {
    let spec = p.spec()?;
    if !p.symbreak {
        return Ok(encode(spec));
    }
    Ok(encode(spec).conjoin(&lex_leader_symbreak(spec.scope())?))
}

fn count_json(r: &CountResult) -> Value {
    match &r.count {
        Some(c) => json!({ "count": c.to_string(), "scientific": format_scientific(c), "timed_out": false }),
        None => json!({ "count": null, "scientific": null, "timed_out": true }),
    }
}

fn cmd_encode(property: &Property, out: Option<&Path>) -> Result<Outcome> {
    let f = formula(property)?;
    let text = emit_dimacs(&f);
    let mut o = Outcome::new("encode", property.json());
    o.report["result"] =
        json!({ "vars": f.num_vars(), "clauses": f.num_clauses(), "projection": f.projection().len() });
    o.row("property", property.property);
    o.row("scope", property.scope);
    o.row("vars", f.num_vars());
    o.row("clauses", f.num_clauses());
    o.row("projection", f.projection().len());
    match out {
        Some(path) => {
            write(path, &text)?;
            o.row("written", path.display());
        }
        None => print!("{text}"),
    }
    Ok(o)
}

fn cmd_count(cnf: &Path, c: &Counting, brute_limit: usize, seed: u64) -> Result<Outcome> {
    let f = read_cnf(cnf)?;
    let mut config = c.json(seed);
    config["cnf"] = json!(cnf.display().to_string());
    let mut o = Outcome::new("count", config);
    let r = match c.mode {
        CounterKind::Exact => count_exact(&f, c.timeout()),
        CounterKind::Brute => count_bruteforce(&f, brute_limit)?,
        CounterKind::Approx => count_approx(&f, c.epsilon, c.delta, seed, c.timeout())?,
    };
    o.report["result"] = count_json(&r);
    o.row("mode", r.mode);
    o.row("projection", f.projection().len());
    match &r.count {
        Some(n) => {
            o.row("count", n);
            o.row("scientific", format_scientific(n));
        }
        None => {
            o.row("count", "timed out");
            o.error = Some(CliError::Timeout(format!("count timed out after {} s", c.timeout)));
        }
    }
    o.row("seconds", format!("{:.3}", r.elapsed.as_secs_f64()));
    Ok(o)
}

fn cmd_gen(
    property: &Property,
    class_ratio: Option<u32>,
    total: usize,
    timeout: u64,
    seed: u64,
    out: &Path,
) -> Result<Outcome> {
    let spec = property.spec()?;
    let t = Duration::from_secs(timeout);
    let ds = match class_ratio {
        None => make_balanced(spec, property.symbreak, seed, t)?,
        Some(p) => make_ratio(spec, property.symbreak, p, total, seed, t)?,
    };
    write(out, &ds.to_csv())?;
    write(&meta_path(out), &ds.meta())?;
    let mut config = property.json();
    config["class_ratio"] = json!(class_ratio);
    config["total"] = json!(class_ratio.map(|_| total));
    config["seed"] = json!(seed);
    config["timeout_seconds"] = json!(timeout);
    let mut o = Outcome::new("gen", config);
    o.report["result"] = json!({ "samples": ds.len(), "positives": ds.positives(), "negatives": ds.negatives() });
    o.row("samples", ds.len());
    o.row("positives", ds.positives());
    o.row("negatives", ds.negatives());
    o.row("written", out.display());
    Ok(o)
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    let csv = read(path)?;
    let meta = read(&meta_path(path))?;
    Ok(Dataset::from_csv(&csv, &meta)?)
}

fn cmd_train(dataset: &Path, ratio: SplitRatio, max_depth: Option<usize>, seed: u64, out: &Path) -> Result<Outcome> {
    let ds = load_dataset(dataset)?;
    let (train, test) = split(&ds, ratio, seed)?;
    let tree = train_cart(&train, TrainParams { max_depth, ..TrainParams::default() })
        .map_err(|e| CliError::Data(e.to_string()))?;
    write(out, &tree.to_json())?;
    let m = eval_traditional(&tree, &test).map_err(|e| CliError::Data(e.to_string()))?;
    let config = json!({
        "dataset": dataset.display().to_string(),
        "ratio": ratio.to_string(),
        "max_depth": max_depth,
        "seed": seed,
    });
    let mut o = Outcome::new("train", config);
    o.report["result"] = json!({
        "train": train.len(),
        "test": test.len(),
        "tree": { "nodes": tree.num_nodes(), "leaves": tree.num_leaves(), "depth": tree.depth() },
        "traditional": traditional_json(&m),
    });
    let s = m.scores();
    o.row("train/test", format!("{}/{}", train.len(), test.len()));
    o.row("nodes", tree.num_nodes());
    o.row("depth", tree.depth());
    o.row("accuracy", format_decimal(&s.accuracy, 4));
    o.row("precision", format_decimal(&s.precision, 4));
    o.row("recall", format_decimal(&s.recall, 4));
    o.row("f1", format_decimal(&s.f1, 4));
    o.row("written", out.display());
    Ok(o)
}

fn cmd_tree2cnf(tree_path: &Path, out: &Path) -> Result<Outcome> {
    let tree = read_tree(tree_path)?;
    let sides = paths(&tree);
    let mut o = Outcome::new("tree2cnf", json!({ "tree": tree_path.display().to_string() }));
    let mut result = serde_json::Map::new();
    for (label, name) in [(true, "true"), (false, "false")] {
        let f = side_cnf_from(&sides, tree.feature_count(), label);
        write(&out.join(format!("tree_{name}.cnf")), &emit_dimacs(&f))?;
        result.insert(name.into(), json!({ "paths": sides.side(!label).len(), "clauses": f.num_clauses() }));
        o.row(&format!("{name} clauses"), f.num_clauses());
    }
    o.report["result"] = Value::Object(result);
    o.row("features", tree.feature_count());
    o.row("written", out.display());
    Ok(o)
}

fn cmd_accmc(tree_path: &Path, property: &Property, c: &Counting, seed: u64) -> Result<Outcome> {
    let tree = read_tree(tree_path)?;
    let phi = positive_formula(property.spec()?, property.symbreak);
    let mut config = property.json();
    config["tree"] = json!(tree_path.display().to_string());
    config["counting"] = c.json(seed);
    let mut o = Outcome::new("accmc", config);
    let r = acc_mc(&phi, &tree, c.mode(seed), c.timeout())?;
    o.report["result"] = r.to_json(false);
    for (k, v) in [("tp", &r.tp), ("fp", &r.fp), ("tn", &r.tn), ("fn", &r.fn_)] {
        o.row(k, format!("{v} ({})", format_scientific(v)));
    }
    let s = r.scores();
    o.row("accuracy", format_decimal(&s.accuracy, 4));
    o.row("precision", format_decimal(&s.precision, 4));
    o.row("recall", format_decimal(&s.recall, 4));
    o.row("f1", format_decimal(&s.f1, 4));
    Ok(o)
}

fn cmd_diffmc(first: &Path, second: &Path, c: &Counting, seed: u64) -> Result<Outcome> {
    let a = read_tree(first)?;
    let b = read_tree(second)?;
    let mut config = c.json(seed);
    config["first"] = json!(first.display().to_string());
    config["second"] = json!(second.display().to_string());
    let mut o = Outcome::new("diffmc", config);
    let r = diff_mc(&a, &b, c.mode(seed), c.timeout())?;
    o.report["result"] = r.to_json(false);
    for (k, v) in [("tt", &r.tt), ("tf", &r.tf), ("ft", &r.ft), ("ff", &r.ff)] {
        o.row(k, format!("{v} ({})", format_scientific(v)));
    }
    o.row("diff", format!("{}%", r.diff_percent()));
    o.row("sim", format_decimal(&r.sim(), 4));
    Ok(o)
}

fn cmd_experiment(cmd: &Command, common: &Common) -> Result<Outcome> {
    let Command::Experiment { config, set, property, scope, counter, out } = cmd else { unreachable!() };
    let mut pairs: Vec<(String, String)> = Vec::new();
    if let Some(path) = config {
        let text = read(path)?;
        let file = ExperimentConfig::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        for line in file.to_kv().lines() {
            if let Some((k, v)) = line.split_once('=') {
                pairs.push((k.into(), v.into()));
            }
        }
    }
    for kv in set {
        let (k, v) =
            kv.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        pairs.push((k.trim().into(), v.trim().into()));
    }
    if let Some(p) = property {
        pairs.push(("property".into(), p.name().into()));
    }
    if let Some(s) = scope {
        pairs.push(("scope".into(), s.to_string()));
    }
    if let Some(c) = counter {
        pairs.push(("counter".into(), c.name().into()));
    }
    if let Some(seed) = common.seed {
        pairs.push(("seed".into(), seed.to_string()));
    }
    let cfg = ExperimentConfig::from_pairs(&pairs).map_err(|e| CliError::Usage(e.to_string()))?;
    let run = run_experiment(&cfg, out).map_err(|e| CliError::Data(e.to_string()))?;
    let mut o = Outcome::new("experiment", cfg.to_json());
    o.report["result"] = run.report.clone();
    for line in format_report(&run.report).lines() {
        o.table.push((String::new(), line.to_string()));
    }
    o.row("written", out.display());
    if let Some(e) = run.error {
        o.error = Some(if run.timed_out { CliError::Timeout(e) } else { CliError::Data(e) });
    }
    Ok(o)
}

fn print_table(rows: &[(String, String)]) {
    let width = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    for (k, v) in rows {
        if k.is_empty() {
            println!("{v}");
        } else {
            println!("{k:<width$}  {v}");
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let seed = cli.common.seed.unwrap_or(0);
    let outcome = match &cli.command {
        Command::Encode { property, out } => cmd_encode(property, out.as_deref())?,
        Command::Count { cnf, counting, brute_limit } => cmd_count(cnf, counting, *brute_limit, seed)?,
        Command::Gen { property, class_ratio, total, timeout, out } => {
            cmd_gen(property, *class_ratio, *total, *timeout, seed, out)?
        }
        Command::Train { dataset, ratio, max_depth, out } => cmd_train(dataset, *ratio, *max_depth, seed, out)?,
        Command::Tree2cnf { tree, out } => cmd_tree2cnf(tree, out)?,
        Command::Accmc { tree, property, counting } => cmd_accmc(tree, property, counting, seed)?,
        Command::Diffmc { first, second, counting } => cmd_diffmc(first, second, counting, seed)?,
        cmd @ Command::Experiment { .. } => cmd_experiment(cmd, &cli.common)?,
    };
    let text = serde_json::to_string_pretty(&outcome.report).expect("json") + "\n";
    if let Some(path) = &cli.common.report {
        write(path, &text)?;
    }
    let stdout_taken = matches!(cli.command, Command::Encode { out: None, .. });
    if cli.common.json && !stdout_taken {
        print!("{text}");
    } else if stdout_taken {
        for (k, v) in &outcome.table {
            eprintln!("{k}: {v}");
        }
    } else {
        print_table(&outcome.table);
    }
    match outcome.error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
