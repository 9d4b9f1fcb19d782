//! Command-line front end: parse one subcommand, dispatch to the
//! library, print exactly one JSON document to stdout.
//!
//! Exit codes: 0 success, 1 usage or input error (with a machine
//! readable error object on stdout), 2 campaign finished with findings.
//! Stdout is valid JSON on every one of those paths and deterministic
//! for a fixed invocation; timing goes to stderr.

use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use octacomp_core::builder::{build_product_model, build_tree_model};
use octacomp_core::feasibility::{check_comparison, FeasOptions};
use octacomp_core::harness::{
    run_question_campaign, run_separation_search, run_theorem_campaign, GeneratorSpec,
};
use octacomp_core::io::{
    feas_report_to_json, graph_from_name, metric_from_json, model_to_json, point_to_json,
    product_config_from_json, trace_to_json, tree_config_from_json, tree_to_json, IoError,
    JsonScalar,
};
use octacomp_core::metric::{is_additive, validate_metric, FiniteMetric};
use octacomp_core::num::{rat_from_f64, Rat, Scalar};
use octacomp_core::tree::{tree_from_additive_metric, TreeError};

const SCHEMA_ERROR: &str = "octacomp.error/1";
const SCHEMA_VALIDATE: &str = "octacomp.validate/1";
const SCHEMA_TREE: &str = "octacomp.tree/1";
const SCHEMA_MODEL: &str = "octacomp.model/1";
const SCHEMA_CHECK: &str = "octacomp.check/1";
const SCHEMA_CAMPAIGN: &str = "octacomp.campaign/1";

#[derive(Parser)]
#[command(
    name = "octacomp",
    version,
    about = "Tree models and comparison-graph feasibility for six-point configurations",
    subcommand_required = true,
    arg_required_else_help = false
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Tolerance for validation and the feasibility oracle.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Override the generator seed (campaign only).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the trial count (campaign only).
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Exact rational arithmetic (default for tree subcommands;
    /// rationals in and out are "p/q" strings).
    #[arg(long, global = true, conflicts_with = "float")]
    exact: bool,

    /// Float arithmetic (numbers in and out).
    #[arg(long, global = true)]
    float: bool,

    /// Also write the JSON output to this file.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check metric axioms and the four-point condition of a distance
    /// matrix ({"labels": [...], "dist": [[...]]}).
    Validate { input: Option<PathBuf> },

    /// Rebuild a metric tree realizing an additive metric.
    ReconstructTree { input: Option<PathBuf> },

    /// Build and verify a model for six points in one metric tree.
    ModelTree { input: Option<PathBuf> },

    /// Build and verify a model for six points in a product of trees.
    ModelProduct { input: Option<PathBuf> },

    /// Decide comparison feasibility of a labeled finite metric.
    Check {
        input: Option<PathBuf>,
        /// Comparison graph: "o3" or "cN" (e.g. "c4").
        #[arg(long, default_value = "o3")]
        graph: String,
        /// Point index per graph vertex, e.g. "0,1,2,3,4,5" or a JSON
        /// array. Defaults to the identity.
        #[arg(long)]
        labeling: Option<String>,
    },

    /// Run a campaign described by a JSON spec: {"campaign":
    /// "theorem"|"question"|"separation", "generator": {...},
    /// "trials": n, "cross_check": bool}.
    Campaign { input: Option<PathBuf> },
}

struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    fn to_json(&self) -> Value {
        json!({
            "schema": SCHEMA_ERROR,
            "error": { "kind": self.kind, "message": self.message },
        })
    }
}

fn fail(kind: &'static str, message: impl Into<String>) -> Failure {
    Failure { kind, message: message.into() }
}

fn io_fail(e: IoError) -> Failure {
    match e {
        IoError::Malformed(_) => fail("parse", e.to_string()),
        _ => fail("input", e.to_string()),
    }
}

fn init_threads() {
    if let Ok(raw) = std::env::var("OCTACOMP_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("ignoring OCTACOMP_THREADS={raw:?}: expected a positive integer"),
        }
    }
}

fn read_value(input: &Option<PathBuf>) -> Result<Value, Failure> {
    let text = match input {
        Some(path) if path.as_os_str() != "-" => fs::read_to_string(path)
            .map_err(|e| fail("io", format!("cannot read {}: {e}", path.display())))?,
        _ => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| fail("io", format!("cannot read stdin: {e}")))?;
            buf
        }
    };
    serde_json::from_str(&text).map_err(|e| fail("parse", format!("invalid JSON: {e}")))
}

fn validate_cmd<S: Scalar + JsonScalar>(v: &Value, tol: S) -> Result<Value, Failure> {
    let m: FiniteMetric<S> = metric_from_json(v).map_err(io_fail)?;
    match validate_metric(&m, &tol) {
        Ok(()) => Ok(json!({
            "schema": SCHEMA_VALIDATE,
            "valid": true,
            "additive": is_additive(&m, &tol),
        })),
        Err(e) => Ok(json!({
            "schema": SCHEMA_VALIDATE,
            "valid": false,
            "additive": Value::Null,
            "reason": e.to_string(),
        })),
    }
}

fn reconstruct_cmd<S: Scalar + JsonScalar>(v: &Value, tol: S) -> Result<Value, Failure> {
    let m: FiniteMetric<S> = metric_from_json(v).map_err(io_fail)?;
    let (tree, points) = tree_from_additive_metric(&m, &tol).map_err(|e| match e {
        TreeError::NotAdditive => fail("not_additive", e.to_string()),
        other => fail("input", other.to_string()),
    })?;
    let mut pts = serde_json::Map::new();
    for (label, p) in m.labels.iter().zip(&points) {
        pts.insert(label.clone(), point_to_json(&tree, p));
    }
    Ok(json!({
        "schema": SCHEMA_TREE,
        "tree": tree_to_json(&tree),
        "points": pts,
    }))
}

fn model_tree_cmd<S: Scalar + JsonScalar>(v: &Value) -> Result<Value, Failure>
where
    S::MC: JsonScalar,
{
    let cfg = tree_config_from_json::<S>(v).map_err(io_fail)?;
    let (model, trace) = build_tree_model(&cfg).map_err(|e| fail("build", e.to_string()))?;
    Ok(json!({
        "schema": SCHEMA_MODEL,
        "model": model_to_json(&model),
        "trace": trace_to_json(&trace),
        "verification": serde_json::to_value(&trace.report).expect("report serializes"),
    }))
}

fn model_product_cmd<S: Scalar + JsonScalar>(v: &Value) -> Result<Value, Failure>
where
    S::MC: JsonScalar,
{
    let cfg = product_config_from_json::<S>(v).map_err(io_fail)?;
    let (model, traces, report) =
        build_product_model(&cfg).map_err(|e| fail("build", e.to_string()))?;
    Ok(json!({
        "schema": SCHEMA_MODEL,
        "model": model_to_json(&model),
        "traces": traces.iter().map(trace_to_json).collect::<Vec<_>>(),
        "verification": serde_json::to_value(&report).expect("report serializes"),
    }))
}

// The oracle is float-only; accept exact-format matrices anyway so
// exact outputs pipe straight in.
fn metric_f64_lenient(v: &Value) -> Result<FiniteMetric<f64>, Failure> {
    match metric_from_json::<f64>(v) {
        Ok(m) => Ok(m),
        Err(first) => metric_from_json::<Rat>(v)
            .map(|m| m.to_f64())
            .map_err(|_| io_fail(first)),
    }
}

fn parse_labeling(text: &str, graph_n: usize, space_n: usize) -> Result<Vec<usize>, Failure> {
    let entries: Vec<usize> = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(_) => text
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| fail("usage", format!("bad labeling {text:?}")))?,
    };
    if entries.len() != graph_n {
        return Err(fail(
            "usage",
            format!("labeling has {} entries for a graph on {graph_n} vertices", entries.len()),
        ));
    }
    if let Some(&bad) = entries.iter().find(|&&i| i >= space_n) {
        return Err(fail("usage", format!("labeling entry {bad} out of range (< {space_n})")));
    }
    Ok(entries)
}

fn check_cmd(
    v: &Value,
    graph_name: &str,
    labeling: &Option<String>,
    tol: Option<f64>,
) -> Result<Value, Failure> {
    let graph = graph_from_name(graph_name).map_err(|e| fail("usage", e.to_string()))?;
    let space = metric_f64_lenient(v)?;
    let labeling = match labeling {
        Some(text) => parse_labeling(text, graph.n(), space.len())?,
        None => {
            if space.len() < graph.n() {
                return Err(fail(
                    "input",
                    format!("{} points cannot label a graph on {} vertices", space.len(), graph.n()),
                ));
            }
            (0..graph.n()).collect()
        }
    };
    let opts = FeasOptions { tol: tol.unwrap_or(f64::default_tol()), ..FeasOptions::default() };
    let report = check_comparison(&graph, &space, &labeling, &opts)
        .map_err(|e| fail("input", e.to_string()))?;
    Ok(json!({
        "schema": SCHEMA_CHECK,
        "graph": graph_name,
        "labeling": labeling,
        "report": feas_report_to_json(&report),
    }))
}

fn campaign_cmd(
    v: &Value,
    seed_override: Option<u64>,
    trials_override: Option<usize>,
) -> Result<(Value, u8), Failure> {
    let kind = v
        .get("campaign")
        .and_then(Value::as_str)
        .ok_or_else(|| fail("parse", "campaign spec needs a \"campaign\" field"))?
        .to_owned();
    let generator = v
        .get("generator")
        .ok_or_else(|| fail("parse", "campaign spec needs a \"generator\" field"))?;
    let mut spec: GeneratorSpec = serde_json::from_value(generator.clone())
        .map_err(|e| fail("parse", format!("bad generator: {e}")))?;
    if let Some(seed) = seed_override {
        spec.seed = seed;
    }
    let trials = trials_override
        .or_else(|| v.get("trials").and_then(Value::as_u64).map(|n| n as usize))
        .ok_or_else(|| fail("usage", "trial count missing: set \"trials\" or pass --trials"))?;
    let cross_check = v.get("cross_check").and_then(Value::as_bool).unwrap_or(false);
    let report = match kind.as_str() {
        "theorem" => run_theorem_campaign(&spec, trials, cross_check),
        "question" => run_question_campaign(&spec, trials),
        "separation" => run_separation_search(&spec, trials),
        other => return Err(fail("usage", format!("unknown campaign {other:?}"))),
    }
    .map_err(|e| fail("bad_spec", e.to_string()))?;
    let code = if report.failures > 0 { 2 } else { 0 };
    let mut body = serde_json::to_value(&report).expect("report serializes");
    // Wall time would break byte-identical reruns; it goes to stderr.
    if let Some(obj) = body.as_object_mut() {
        if let Some(ms) = obj.remove("wall_ms") {
            eprintln!("campaign finished in {ms} ms");
        }
    }
    Ok((
        json!({
            "schema": SCHEMA_CAMPAIGN,
            "campaign": kind,
            "seed": spec.seed,
            "trials": trials,
            "report": body,
        }),
        code,
    ))
}

fn exact_tol(flag: Option<f64>) -> Result<Rat, Failure> {
    match flag {
        None => Ok(Rat::default_tol()),
        Some(x) => {
            rat_from_f64(x).ok_or_else(|| fail("usage", format!("tolerance {x} is not finite")))
        }
    }
}

fn run(cli: &Cli) -> Result<(Value, u8), Failure> {
    let float = cli.float;
    match &cli.command {
        Cmd::Validate { input } => {
            let v = read_value(input)?;
            let out = if float {
                validate_cmd::<f64>(&v, cli.tol.unwrap_or(f64::default_tol()))?
            } else {
                validate_cmd::<Rat>(&v, exact_tol(cli.tol)?)?
            };
            Ok((out, 0))
        }
        Cmd::ReconstructTree { input } => {
            let v = read_value(input)?;
            let out = if float {
                reconstruct_cmd::<f64>(&v, cli.tol.unwrap_or(f64::default_tol()))?
            } else {
                reconstruct_cmd::<Rat>(&v, exact_tol(cli.tol)?)?
            };
            Ok((out, 0))
        }
        Cmd::ModelTree { input } => {
            let v = read_value(input)?;
            let out =
                if float { model_tree_cmd::<f64>(&v)? } else { model_tree_cmd::<Rat>(&v)? };
            Ok((out, 0))
        }
        Cmd::ModelProduct { input } => {
            let v = read_value(input)?;
            let out =
                if float { model_product_cmd::<f64>(&v)? } else { model_product_cmd::<Rat>(&v)? };
            Ok((out, 0))
        }
        Cmd::Check { input, graph, labeling } => {
            let v = read_value(input)?;
            Ok((check_cmd(&v, graph, labeling, cli.tol)?, 0))
        }
        Cmd::Campaign { input } => {
            let v = read_value(input)?;
            campaign_cmd(&v, cli.seed, cli.trials)
        }
    }
}

fn emit(value: &Value, out: &Option<PathBuf>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    if let Some(path) = out {
        fs::write(path, format!("{text}\n"))
            .map_err(|e| fail("io", format!("cannot write {}: {e}", path.display())))?;
    }
    // A reader closing the pipe early (e.g. `| head`) is not our error.
    let mut stdout = io::stdout().lock();
    let _ = writeln!(stdout, "{text}");
    Ok(())
}

fn main() -> ExitCode {
    init_threads();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = write!(io::stdout().lock(), "{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let f = fail("usage", e.to_string());
            let _ = emit(&f.to_json(), &None);
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok((value, code)) => match emit(&value, &cli.out) {
            Ok(()) => ExitCode::from(code),
            Err(f) => {
                let _ = emit(&f.to_json(), &None);
                ExitCode::from(1)
            }
        },
        Err(f) => {
            let _ = emit(&f.to_json(), &cli.out);
            ExitCode::from(1)
        }
    }
}
