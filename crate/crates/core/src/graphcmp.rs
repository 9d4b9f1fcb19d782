//! Comparison graphs and constraint checking.
//!
//! A comparison graph turns a labeled metric space into a constraint
//! set: adjacent pairs must not get longer in the model, non-adjacent
//! pairs must not get shorter. [`verify_model`] checks a candidate
//! model configuration against such a set, comparing squared distances
//! so that exact rational/quadratic coordinates verify with zero
//! tolerance.

use crate::metric::FiniteMetric;
use crate::num::Scalar;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Role labels of the octahedron vertices, in index order.
pub const O3_ROLES: [&str; 6] = ["x", "y", "z", "x'", "y'", "z'"];

/// Index pairs of the three diagonals under [`O3_ROLES`] ordering.
pub const O3_DIAGONALS: [(usize, usize); 3] = [(0, 3), (1, 4), (2, 5)];

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GraphError {
    #[error("cycle graphs need at least 3 vertices, got {0}")]
    BadSize(usize),
    #[error("labeling is not a bijection onto the space points")]
    LabelingNotBijective,
    #[error("model does not match the constraint set: {0}")]
    DimensionMismatch(String),
    #[error("exact verification impossible: {0}")]
    ExactnessLost(String),
}

/// Finite simple graph with named vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonGraph {
    labels: Vec<String>,
    adj: Vec<Vec<bool>>,
}

impl ComparisonGraph {
    pub fn new(labels: Vec<String>, adj: Vec<Vec<bool>>) -> Self {
        let n = labels.len();
        assert!(adj.len() == n && adj.iter().all(|r| r.len() == n), "square adjacency");
        for i in 0..n {
            assert!(!adj[i][i], "no self-loops");
            for j in 0..n {
                assert!(adj[i][j] == adj[j][i], "symmetric adjacency");
            }
        }
        ComparisonGraph { labels, adj }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.adj[i][j]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].iter().filter(|&&a| a).count()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n()).map(|i| self.degree(i)).sum::<usize>() / 2
    }
}

/// The octahedron graph on x, y, z, x', y', z': all pairs adjacent
/// except the three diagonals (x,x'), (y,y'), (z,z').
pub fn octahedron_graph() -> ComparisonGraph {
    let n = 6;
    let mut adj = vec![vec![true; n]; n];
    for i in 0..n {
        adj[i][i] = false;
    }
    for &(i, j) in &O3_DIAGONALS {
        adj[i][j] = false;
        adj[j][i] = false;
    }
    ComparisonGraph::new(O3_ROLES.iter().map(|s| s.to_string()).collect(), adj)
}

/// The n-cycle c0, c1, …, c(n-1).
pub fn cycle_graph(n: usize) -> Result<ComparisonGraph, GraphError> {
    if n < 3 {
        return Err(GraphError::BadSize(n));
    }
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        let j = (i + 1) % n;
        adj[i][j] = true;
        adj[j][i] = true;
    }
    let labels = (0..n).map(|i| format!("c{i}")).collect();
    Ok(ComparisonGraph::new(labels, adj))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    /// Adjacent pair: model distance must not exceed the bound.
    Upper,
    /// Non-adjacent pair: model distance must not fall below the bound.
    Lower,
}

/// One pairwise constraint. `bound_sq` is always exact in the scalar
/// field; `bound` itself is absent when only the square is
/// representable (product distances of rational factors).
#[derive(Clone, Debug)]
pub struct Constraint<S> {
    pub i: usize,
    pub j: usize,
    pub sense: Sense,
    pub bound_sq: S,
    pub bound: Option<S>,
}

/// All n(n-1)/2 pairwise constraints of one graph/space/labeling.
#[derive(Clone, Debug)]
pub struct ConstraintSet<S> {
    pub labels: Vec<String>,
    pub items: Vec<Constraint<S>>,
}

/// Generate the constraint set for `graph` over `space`, where
/// `labeling[v]` is the space point playing graph vertex `v`.
pub fn constraints<S: Scalar>(
    graph: &ComparisonGraph,
    space: &FiniteMetric<S>,
    labeling: &[usize],
) -> Result<ConstraintSet<S>, GraphError> {
    let n = graph.n();
    if labeling.len() != n || space.len() != n {
        return Err(GraphError::LabelingNotBijective);
    }
    let mut seen = vec![false; n];
    for &p in labeling {
        if p >= n || seen[p] {
            return Err(GraphError::LabelingNotBijective);
        }
        seen[p] = true;
    }
    let mut items = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = space.d(labeling[i], labeling[j]).clone();
            let sense = if graph.is_adjacent(i, j) { Sense::Upper } else { Sense::Lower };
            items.push(Constraint {
                i,
                j,
                sense,
                bound_sq: d.clone() * d.clone(),
                bound: Some(d),
            });
        }
    }
    Ok(ConstraintSet { labels: graph.labels().to_vec(), items })
}

/// A candidate model: one coordinate vector per label, all the same
/// dimension. Coordinates are the scalar's model-coordinate type, so
/// exact runs carry quadratic-field entries.
#[derive(Clone, Debug)]
pub struct ModelConfiguration<S: Scalar> {
    pub labels: Vec<String>,
    pub points: Vec<Vec<S::MC>>,
}

impl<S: Scalar> ModelConfiguration<S> {
    pub fn new(labels: Vec<String>, points: Vec<Vec<S::MC>>) -> Result<Self, GraphError> {
        if labels.len() != points.len() {
            return Err(GraphError::DimensionMismatch(format!(
                "{} labels but {} points",
                labels.len(),
                points.len()
            )));
        }
        let d = points.first().map(|p| p.len()).unwrap_or(0);
        if d == 0 || points.iter().any(|p| p.len() != d) {
            return Err(GraphError::DimensionMismatch(
                "points must share one dimension >= 1".into(),
            ));
        }
        Ok(ModelConfiguration { labels, points })
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Exact squared model distance between labels `i` and `j`.
    pub fn sq_dist(&self, i: usize, j: usize) -> Result<S, GraphError> {
        S::mc_sq_dist(&self.points[i], &self.points[j]).ok_or_else(|| {
            GraphError::ExactnessLost(format!(
                "squared distance {} - {} leaves the scalar field",
                self.labels[i], self.labels[j]
            ))
        })
    }
}

/// One verified constraint, reported in floats for display. Slacks use
/// the convention nonnegative = satisfied; conversions are monotone, so
/// an exact pass never reports a negative slack.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlackEntry {
    pub i: String,
    pub j: String,
    pub sense: Sense,
    pub bound: f64,
    pub distance: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub min_slack: f64,
    pub slacks: Vec<SlackEntry>,
    pub violations: Vec<SlackEntry>,
}

/// Check a model against a constraint set.
///
/// Exact scalars compare squared distances against squared bounds with
/// no tolerance at all; floats compare distance slacks against `tol`.
/// The report always carries float slacks for display.
pub fn verify_model<S: Scalar>(
    cs: &ConstraintSet<S>,
    model: &ModelConfiguration<S>,
    tol: &S,
) -> Result<VerificationReport, GraphError> {
    if model.labels != cs.labels {
        return Err(GraphError::DimensionMismatch(
            "model labels do not match constraint labels".into(),
        ));
    }
    let mut passed = true;
    let mut slacks = Vec::with_capacity(cs.items.len());
    let mut violations = Vec::new();
    let mut min_slack = f64::INFINITY;
    for c in &cs.items {
        let sq = model.sq_dist(c.i, c.j)?;
        let ok = if S::is_exact() {
            match c.sense {
                Sense::Upper => sq <= c.bound_sq,
                Sense::Lower => sq >= c.bound_sq,
            }
        } else {
            let dist = sq.to_f64().max(0.0).sqrt();
            let bound = bound_f64(c);
            let slack = match c.sense {
                Sense::Upper => bound - dist,
                Sense::Lower => dist - bound,
            };
            slack >= -tol.to_f64()
        };
        let dist_f = sq.to_f64().max(0.0).sqrt();
        let bound_f = bound_f64(c);
        let slack_f = match c.sense {
            Sense::Upper => bound_f - dist_f,
            Sense::Lower => dist_f - bound_f,
        };
        let entry = SlackEntry {
            i: cs.labels[c.i].clone(),
            j: cs.labels[c.j].clone(),
            sense: c.sense,
            bound: bound_f,
            distance: dist_f,
            slack: slack_f,
        };
        min_slack = min_slack.min(slack_f);
        if !ok {
            passed = false;
            violations.push(entry.clone());
        }
        slacks.push(entry);
    }
    if cs.items.is_empty() {
        min_slack = 0.0;
    }
    Ok(VerificationReport { passed, min_slack, slacks, violations })
}

fn bound_f64<S: Scalar>(c: &Constraint<S>) -> f64 {
    match &c.bound {
        Some(b) => b.to_f64(),
        None => c.bound_sq.to_f64().max(0.0).sqrt(),
    }
}

/// The 48 adjacency-preserving vertex permutations of the octahedron:
/// all ways to permute the three diagonals and flip each diagonal's
/// endpoints. `perm[r]` is the image of vertex `r`; the identity comes
/// first.
pub fn o3_automorphisms() -> Vec<[usize; 6]> {
    const DIAG_PERMS: [[usize; 3]; 6] =
        [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(48);
    for pi in DIAG_PERMS {
        for flips in 0..8u8 {
            let mut perm = [0usize; 6];
            for r in 0..3 {
                let flip = (flips >> r) & 1 == 1;
                perm[r] = pi[r] + if flip { 3 } else { 0 };
                perm[r + 3] = pi[r] + if flip { 0 } else { 3 };
            }
            out.push(perm);
        }
    }
    out
}
