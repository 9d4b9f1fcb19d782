//! JSON wire formats shared by the library surface and the command line.
//!
//! The encoding is mode-faithful: exact scalars travel as rational
//! strings (`"3/4"`), exact model coordinates as `{"r","s","k"}`
//! quadratic pairs, and float data as plain numbers. Parsing an exact
//! slot refuses bare floats rather than rounding them.

use serde_json::{json, Value};
use thiserror::Error;

use crate::builder::{
    role_labels, BuildError, BuildTrace, CaseTaken, ProductSixConfig, TreeSixConfig,
};
use crate::feasibility::FeasibilityReport;
use crate::graphcmp::{
    cycle_graph, octahedron_graph, ComparisonGraph, ConstraintSet, GraphError,
    ModelConfiguration, Sense,
};
use crate::metric::FiniteMetric;
use crate::num::{format_rat, parse_rat, rat, Quad, Rat, Scalar};
use crate::tree::{MetricTree, TreeError, TreePoint};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{0}")]
    Malformed(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn bad(msg: impl Into<String>) -> IoError {
    IoError::Malformed(msg.into())
}

/// Scalar <-> JSON. Every implementation round-trips exactly.
pub trait JsonScalar: Sized {
    fn to_json(&self) -> Value;
    fn from_json(v: &Value) -> Result<Self, IoError>;
}

impl JsonScalar for f64 {
    fn to_json(&self) -> Value {
        json!(self)
    }

    fn from_json(v: &Value) -> Result<f64, IoError> {
        v.as_f64()
            .ok_or_else(|| bad(format!("expected a number, got {v}")))
    }
}

impl JsonScalar for Rat {
    fn to_json(&self) -> Value {
        Value::String(format_rat(self))
    }

    fn from_json(v: &Value) -> Result<Rat, IoError> {
        match v {
            Value::String(s) => {
                parse_rat(s).ok_or_else(|| bad(format!("malformed rational {s:?}")))
            }
            Value::Number(n) => match n.as_i64() {
                Some(i) => Ok(rat(i, 1)),
                None => Err(bad(format!(
                    "non-integer number {n} in an exact slot; write it as \"p/q\""
                ))),
            },
            other => Err(bad(format!("expected a rational string, got {other}"))),
        }
    }
}

impl JsonScalar for Quad {
    fn to_json(&self) -> Value {
        json!({
            "r": format_rat(self.rational_part()),
            "s": format_rat(self.radical_coeff()),
            "k": format_rat(self.radicand()),
        })
    }

    fn from_json(v: &Value) -> Result<Quad, IoError> {
        // A bare rational is the degenerate pair (r, 0, 0).
        if matches!(v, Value::String(_) | Value::Number(_)) {
            return Ok(Quad::from_rat(Rat::from_json(v)?));
        }
        let obj = v
            .as_object()
            .ok_or_else(|| bad(format!("expected a quadratic pair, got {v}")))?;
        let field = |name: &str| -> Result<Rat, IoError> {
            let inner = obj
                .get(name)
                .ok_or_else(|| bad(format!("quadratic pair missing {name:?}")))?;
            Rat::from_json(inner)
        };
        Quad::from_parts(field("r")?, field("s")?, field("k")?)
            .ok_or_else(|| bad("negative radicand in quadratic pair"))
    }
}

pub fn metric_to_json<S: Scalar + JsonScalar>(m: &FiniteMetric<S>) -> Value {
    let dist: Vec<Value> = m
        .dist
        .iter()
        .map(|row| Value::Array(row.iter().map(JsonScalar::to_json).collect()))
        .collect();
    json!({ "labels": m.labels, "dist": dist })
}

pub fn metric_from_json<S: Scalar + JsonScalar>(v: &Value) -> Result<FiniteMetric<S>, IoError> {
    let labels = string_array(field(v, "labels")?, "labels")?;
    let rows = field(v, "dist")?
        .as_array()
        .ok_or_else(|| bad("\"dist\" must be an array of rows"))?;
    if rows.len() != labels.len() {
        return Err(bad(format!(
            "{} labels but {} distance rows",
            labels.len(),
            rows.len()
        )));
    }
    let mut dist = Vec::with_capacity(rows.len());
    for row in rows {
        let row = row
            .as_array()
            .ok_or_else(|| bad("distance rows must be arrays"))?;
        if row.len() != labels.len() {
            return Err(bad("distance matrix must be square"));
        }
        dist.push(row.iter().map(S::from_json).collect::<Result<Vec<_>, _>>()?);
    }
    Ok(FiniteMetric::new(labels, dist))
}

fn field<'a>(v: &'a Value, name: &str) -> Result<&'a Value, IoError> {
    v.get(name)
        .ok_or_else(|| bad(format!("missing field {name:?}")))
}

fn string_array(v: &Value, what: &str) -> Result<Vec<String>, IoError> {
    v.as_array()
        .ok_or_else(|| bad(format!("{what:?} must be an array of strings")))?
        .iter()
        .map(|s| {
            s.as_str()
                .map(str::to_owned)
                .ok_or_else(|| bad(format!("{what:?} entries must be strings")))
        })
        .collect()
}

fn index(v: &Value, what: &str, n: usize) -> Result<usize, IoError> {
    let i = v
        .as_u64()
        .ok_or_else(|| bad(format!("{what} must be a nonnegative integer")))?
        as usize;
    if i >= n {
        return Err(bad(format!("{what} {i} out of range (< {n})")));
    }
    Ok(i)
}

pub fn point_to_json<S: Scalar + JsonScalar>(tree: &MetricTree<S>, p: &TreePoint<S>) -> Value {
    match p {
        TreePoint::Vertex(v) => json!({ "vertex": v }),
        TreePoint::Edge { edge, offset } => {
            let e = &tree.edges()[*edge];
            json!({ "edge": [e.u, e.v], "offset": offset.to_json() })
        }
    }
}

/// Accepts `{"vertex": i}` or `{"edge": [u, v], "offset": t}`; the edge
/// endpoints may come in either order, with the offset always measured
/// from the first one named.
pub fn point_from_json<S: Scalar + JsonScalar>(
    tree: &MetricTree<S>,
    v: &Value,
) -> Result<TreePoint<S>, IoError> {
    if let Some(vertex) = v.get("vertex") {
        let idx = index(vertex, "vertex", tree.vertex_count())?;
        return Ok(TreePoint::Vertex(idx));
    }
    let ends = field(v, "edge")?
        .as_array()
        .ok_or_else(|| bad("\"edge\" must be a two-element array [u, v]"))?;
    if ends.len() != 2 {
        return Err(bad("\"edge\" must be a two-element array [u, v]"));
    }
    let a = index(&ends[0], "edge endpoint", tree.vertex_count())?;
    let b = index(&ends[1], "edge endpoint", tree.vertex_count())?;
    let offset = S::from_json(field(v, "offset")?)?;
    for (e, edge) in tree.edges().iter().enumerate() {
        if (edge.u, edge.v) == (a, b) {
            return Ok(tree.point_on_edge(e, offset)?);
        }
        if (edge.u, edge.v) == (b, a) {
            let flipped = edge.len.clone() - offset;
            return Ok(tree.point_on_edge(e, flipped)?);
        }
    }
    Err(bad(format!("no edge joins vertices {a} and {b}")))
}

/// Vertices and edges only; callers attach whatever point map fits.
pub fn tree_to_json<S: Scalar + JsonScalar>(tree: &MetricTree<S>) -> Value {
    let edges: Vec<Value> = tree
        .edges()
        .iter()
        .map(|e| json!([e.u, e.v, e.len.to_json()]))
        .collect();
    json!({ "vertices": tree.names(), "edges": edges })
}

pub fn tree_config_to_json<S: Scalar + JsonScalar>(cfg: &TreeSixConfig<S>) -> Value {
    let mut v = tree_to_json(&cfg.tree);
    let mut points = serde_json::Map::new();
    for (role, p) in role_labels().into_iter().zip(&cfg.points) {
        points.insert(role, point_to_json(&cfg.tree, p));
    }
    v["points"] = Value::Object(points);
    v
}

pub fn tree_config_from_json<S: Scalar + JsonScalar>(
    v: &Value,
) -> Result<TreeSixConfig<S>, IoError> {
    let names = string_array(field(v, "vertices")?, "vertices")?;
    let n = names.len();
    let raw_edges = field(v, "edges")?
        .as_array()
        .ok_or_else(|| bad("\"edges\" must be an array"))?;
    let mut edges = Vec::with_capacity(raw_edges.len());
    for e in raw_edges {
        let triple = e
            .as_array()
            .filter(|t| t.len() == 3)
            .ok_or_else(|| bad("each edge must be [u, v, length]"))?;
        let u = index(&triple[0], "edge endpoint", n)?;
        let w = index(&triple[1], "edge endpoint", n)?;
        edges.push((u, w, S::from_json(&triple[2])?));
    }
    let tree = MetricTree::new(names, edges)?;
    let raw_points = field(v, "points")?
        .as_object()
        .ok_or_else(|| bad("\"points\" must be an object keyed by role"))?;
    let mut points = Vec::with_capacity(6);
    for role in role_labels() {
        let p = raw_points
            .get(&role)
            .ok_or_else(|| bad(format!("missing point for role {role:?}")))?;
        points.push(point_from_json(&tree, p)?);
    }
    Ok(TreeSixConfig::new(tree, points)?)
}

pub fn product_config_to_json<S: Scalar + JsonScalar>(cfg: &ProductSixConfig<S>) -> Value {
    json!({ "factors": cfg.factors.iter().map(tree_config_to_json).collect::<Vec<_>>() })
}

pub fn product_config_from_json<S: Scalar + JsonScalar>(
    v: &Value,
) -> Result<ProductSixConfig<S>, IoError> {
    let factors = field(v, "factors")?
        .as_array()
        .ok_or_else(|| bad("\"factors\" must be an array"))?
        .iter()
        .map(tree_config_from_json)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProductSixConfig::new(factors)?)
}

pub fn constraints_to_json<S: Scalar + JsonScalar>(cs: &ConstraintSet<S>) -> Value {
    let items: Vec<Value> = cs
        .items
        .iter()
        .map(|c| {
            json!({
                "i": cs.labels[c.i],
                "j": cs.labels[c.j],
                "sense": match c.sense {
                    Sense::Upper => "upper",
                    Sense::Lower => "lower",
                },
                "bound": c.bound.as_ref().map(JsonScalar::to_json),
                "bound_sq": c.bound_sq.to_json(),
            })
        })
        .collect();
    Value::Array(items)
}

pub fn model_to_json<S: Scalar>(m: &ModelConfiguration<S>) -> Value
where
    S::MC: JsonScalar,
{
    let mut points = serde_json::Map::new();
    for (label, coords) in m.labels.iter().zip(&m.points) {
        points.insert(
            label.clone(),
            Value::Array(coords.iter().map(JsonScalar::to_json).collect()),
        );
    }
    json!({ "dim": m.dim(), "labels": m.labels, "points": points })
}

fn matrix_to_json<S: JsonScalar>(rows: &[Vec<S>]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| Value::Array(r.iter().map(JsonScalar::to_json).collect()))
            .collect(),
    )
}

// Move records live on the builder's working tree (post-merge,
// post-shrink), so edges are reported by index rather than resolved
// against the input tree's endpoints.
fn raw_point_to_json<S: Scalar + JsonScalar>(p: &TreePoint<S>) -> Value {
    match p {
        TreePoint::Vertex(v) => json!({ "vertex": v }),
        TreePoint::Edge { edge, offset } => {
            json!({ "edge_index": edge, "offset": offset.to_json() })
        }
    }
}

pub fn trace_to_json<S: Scalar + JsonScalar>(t: &BuildTrace<S>) -> Value
where
    S::MC: JsonScalar,
{
    let shrinks: Vec<Value> = t
        .shrinks
        .iter()
        .map(|s| {
            json!({
                "pair": [s.pair.0, s.pair.1],
                "connector_len": s.connector_len.to_json(),
                "dist_after": matrix_to_json(&s.dist_after),
            })
        })
        .collect();
    let moves: Vec<Value> = t
        .moves
        .iter()
        .map(|m| {
            json!({
                "role": m.role,
                "from": raw_point_to_json(&m.from),
                "to": raw_point_to_json(&m.to),
                "dist_after": matrix_to_json(&m.dist_after),
            })
        })
        .collect();
    let case = match t.case {
        CaseTaken::Collinear { flip_y, flip_z } => {
            json!({ "kind": "collinear", "flip_y": flip_y, "flip_z": flip_z })
        }
        CaseTaken::Tripod => json!({ "kind": "tripod" }),
    };
    json!({
        "initial_dist": matrix_to_json(&t.initial_dist),
        "merges": t.merges,
        "shrinks": shrinks,
        "moves": moves,
        "case": case,
        "automorphism": t.automorphism,
        "abc": t.abc,
        "model": model_to_json(&t.model),
        "verification": serde_json::to_value(&t.report).expect("report serializes"),
    })
}

pub fn feas_report_to_json(r: &FeasibilityReport) -> Value {
    json!({
        "verdict": serde_json::to_value(r.verdict).expect("verdict serializes"),
        "model": r.model.as_ref().map(model_to_json),
        "max_violation": r.max_violation,
        "min_slack": r.min_slack,
        "residual": r.residual,
        "iterations": r.iterations,
    })
}

/// Named comparison graphs: `"o3"` (or `"octahedron"`) and `"cN"` for
/// the N-cycle, N >= 3.
pub fn graph_from_name(name: &str) -> Result<ComparisonGraph, IoError> {
    let lower = name.trim().to_ascii_lowercase();
    match lower.as_str() {
        "o3" | "octahedron" => return Ok(octahedron_graph()),
        _ => {}
    }
    if let Some(rest) = lower.strip_prefix('c') {
        if let Ok(n) = rest.parse::<usize>() {
            return Ok(cycle_graph(n)?);
        }
    }
    Err(bad(format!(
        "unknown graph {name:?}; expected \"o3\" or \"cN\""
    )))
}

/// A labeling is an array of point indices, one per graph vertex.
pub fn labeling_from_json(
    v: &Value,
    graph_n: usize,
    space_n: usize,
) -> Result<Vec<usize>, IoError> {
    let arr = v
        .as_array()
        .ok_or_else(|| bad("labeling must be an array of point indices"))?;
    if arr.len() != graph_n {
        return Err(bad(format!(
            "labeling has {} entries for a graph on {graph_n} vertices",
            arr.len()
        )));
    }
    arr.iter()
        .map(|e| index(e, "labeling entry", space_n))
        .collect()
}
