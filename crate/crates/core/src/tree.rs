//! Metric trees and the geodesic toolkit.
//!
//! A [`MetricTree`] is a finite combinatorial tree with strictly
//! positive edge lengths. Points live either on vertices or strictly
//! inside edges ([`TreePoint`]); constructors canonicalize boundary
//! offsets to vertices, so two equal points on an edge interior always
//! compare equal structurally.
//!
//! All operations are generic over [`Scalar`]: with rational scalars
//! every distance, median, and projection below is exact, which is what
//! makes zero-tolerance verification of the models possible.

use crate::metric::{validate_metric, FiniteMetric};
use crate::num::Scalar;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TreeError {
    #[error("tree must have at least one vertex")]
    Empty,
    #[error("expected {expected} edges for {vertices} vertices, got {got}")]
    WrongEdgeCount { vertices: usize, expected: usize, got: usize },
    #[error("edge {edge} endpoint {vertex} out of range")]
    VertexOutOfRange { edge: usize, vertex: usize },
    #[error("edge {0} is a self-loop")]
    SelfLoop(usize),
    #[error("edge {0} has non-positive length")]
    NonPositiveLength(usize),
    #[error("edge list does not connect the tree")]
    Disconnected,
    #[error("duplicate vertex name {0:?}")]
    DuplicateName(String),
    #[error("offset outside edge {edge}")]
    OffsetOutOfRange { edge: usize },
    #[error("arclength parameter outside geodesic")]
    ArcOutOfRange,
    #[error("diagonal geodesics do not form a connected union")]
    DisconnectedDiagonals,
    #[error("metric is not additive (four-point condition fails)")]
    NotAdditive,
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

/// Weighted tree edge between vertex indices `u` and `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge<S> {
    pub u: usize,
    pub v: usize,
    pub len: S,
}

/// A point of the geometric realization of the tree.
///
/// `Edge { edge, offset }` measures arclength from `edges[edge].u` and
/// satisfies `0 < offset < len`; boundary offsets collapse to the
/// incident vertex.
#[derive(Clone, Debug, PartialEq)]
pub enum TreePoint<S> {
    Vertex(usize),
    Edge { edge: usize, offset: S },
}

/// The unique geodesic between two tree points.
///
/// `verts` lists every tree vertex on the closed segment in travel
/// order from `p` to `q`; it is empty exactly when both endpoints are
/// interior to one edge. A geodesic is only meaningful for the tree
/// that produced it.
#[derive(Clone, Debug)]
pub struct Geodesic<S> {
    pub p: TreePoint<S>,
    pub q: TreePoint<S>,
    pub verts: Vec<usize>,
    pub len: S,
}

/// Intersection of two geodesics in a tree: empty, one point, or a
/// common subsegment.
#[derive(Clone, Debug)]
pub enum Intersection<S> {
    Empty,
    Point(TreePoint<S>),
    Segment(TreePoint<S>, TreePoint<S>),
}

impl<S: Clone> Intersection<S> {
    pub fn is_empty(&self) -> bool {
        matches!(self, Intersection::Empty)
    }

    /// Endpoints of the intersection, when nonempty.
    pub fn endpoints(&self) -> Vec<TreePoint<S>> {
        match self {
            Intersection::Empty => vec![],
            Intersection::Point(p) => vec![p.clone()],
            Intersection::Segment(a, b) => vec![a.clone(), b.clone()],
        }
    }
}

fn min_s<S: Scalar>(a: S, b: S) -> S {
    if a <= b {
        a
    } else {
        b
    }
}

/// A finite tree with named vertices, positive edge lengths, and an
/// eagerly computed all-pairs vertex distance table.
#[derive(Clone, Debug)]
pub struct MetricTree<S> {
    names: Vec<String>,
    edges: Vec<Edge<S>>,
    adj: Vec<Vec<(usize, usize)>>,
    vdist: Vec<Vec<S>>,
}

impl<S: Scalar> MetricTree<S> {
    pub fn new(names: Vec<String>, edges: Vec<(usize, usize, S)>) -> Result<Self, TreeError> {
        let n = names.len();
        if n == 0 {
            return Err(TreeError::Empty);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if names[i] == names[j] {
                    return Err(TreeError::DuplicateName(names[i].clone()));
                }
            }
        }
        if edges.len() != n - 1 {
            return Err(TreeError::WrongEdgeCount { vertices: n, expected: n - 1, got: edges.len() });
        }
        let mut es = Vec::with_capacity(edges.len());
        for (idx, (u, v, len)) in edges.into_iter().enumerate() {
            if u >= n {
                return Err(TreeError::VertexOutOfRange { edge: idx, vertex: u });
            }
            if v >= n {
                return Err(TreeError::VertexOutOfRange { edge: idx, vertex: v });
            }
            if u == v {
                return Err(TreeError::SelfLoop(idx));
            }
            if !(len > S::zero()) {
                return Err(TreeError::NonPositiveLength(idx));
            }
            es.push(Edge { u, v, len });
        }
        let mut adj = vec![Vec::new(); n];
        for (idx, e) in es.iter().enumerate() {
            adj[e.u].push((e.v, idx));
            adj[e.v].push((e.u, idx));
        }
        let mut tree = MetricTree { names, edges: es, adj, vdist: Vec::new() };
        tree.rebuild_vdist()?;
        Ok(tree)
    }

    fn rebuild_vdist(&mut self) -> Result<(), TreeError> {
        let n = self.names.len();
        let mut vdist = vec![vec![S::zero(); n]; n];
        for src in 0..n {
            let mut seen = vec![false; n];
            let mut stack = vec![src];
            seen[src] = true;
            while let Some(a) = stack.pop() {
                for &(b, e) in &self.adj[a] {
                    if !seen[b] {
                        seen[b] = true;
                        vdist[src][b] = vdist[src][a].clone() + self.edges[e].len.clone();
                        stack.push(b);
                    }
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(TreeError::Disconnected);
            }
        }
        self.vdist = vdist;
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn edges(&self) -> &[Edge<S>] {
        &self.edges
    }

    pub fn vertex_named(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn vertex_distance(&self, a: usize, b: usize) -> &S {
        &self.vdist[a][b]
    }

    /// Point on edge `e` at arclength `offset` from `edges[e].u`,
    /// canonicalized to a vertex at the boundary. Small float overshoot
    /// (within the scalar's default tolerance) clamps to the boundary.
    pub fn point_on_edge(&self, e: usize, offset: S) -> Result<TreePoint<S>, TreeError> {
        if e >= self.edges.len() {
            return Err(TreeError::OffsetOutOfRange { edge: e });
        }
        let edge = &self.edges[e];
        let zero = S::zero();
        let tol = S::default_tol();
        if !zero.le_within(&offset, &tol) || !offset.le_within(&edge.len, &tol) {
            return Err(TreeError::OffsetOutOfRange { edge: e });
        }
        if offset <= zero {
            Ok(TreePoint::Vertex(edge.u))
        } else if offset >= edge.len {
            Ok(TreePoint::Vertex(edge.v))
        } else {
            Ok(TreePoint::Edge { edge: e, offset })
        }
    }

    fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adj[a].iter().find(|&&(nb, _)| nb == b).map(|&(_, e)| e)
    }

    fn vertex_to_point(&self, a: usize, q: &TreePoint<S>) -> S {
        match q {
            TreePoint::Vertex(b) => self.vdist[a][*b].clone(),
            TreePoint::Edge { edge, offset } => {
                let e = &self.edges[*edge];
                min_s(
                    offset.clone() + self.vdist[e.u][a].clone(),
                    (e.len.clone() - offset.clone()) + self.vdist[e.v][a].clone(),
                )
            }
        }
    }

    pub fn distance(&self, p: &TreePoint<S>, q: &TreePoint<S>) -> S {
        match (p, q) {
            (TreePoint::Vertex(a), _) => self.vertex_to_point(*a, q),
            (_, TreePoint::Vertex(b)) => self.vertex_to_point(*b, p),
            (TreePoint::Edge { edge: e, offset: t }, TreePoint::Edge { edge: f, offset: s }) => {
                if e == f {
                    (t.clone() - s.clone()).abs_val()
                } else {
                    let ee = &self.edges[*e];
                    let from_u = t.clone();
                    let from_v = ee.len.clone() - t.clone();
                    min_s(
                        from_u + self.vertex_to_point(ee.u, q),
                        from_v + self.vertex_to_point(ee.v, q),
                    )
                }
            }
        }
    }

    /// `true` when `p` and `q` are at distance at most `tol`.
    pub fn point_eq(&self, p: &TreePoint<S>, q: &TreePoint<S>, tol: &S) -> bool {
        self.distance(p, q).le_within(&S::zero(), tol)
    }

    fn vertex_path(&self, a: usize, b: usize) -> Vec<usize> {
        if a == b {
            return vec![a];
        }
        let n = self.names.len();
        let mut parent = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        parent[a] = a;
        queue.push_back(a);
        while let Some(x) = queue.pop_front() {
            if x == b {
                break;
            }
            for &(y, _) in &self.adj[x] {
                if parent[y] == usize::MAX {
                    parent[y] = x;
                    queue.push_back(y);
                }
            }
        }
        let mut path = vec![b];
        let mut cur = b;
        while cur != a {
            cur = parent[cur];
            path.push(cur);
        }
        path.reverse();
        path
    }

    /// Vertex through which the geodesic from `p` leaves `p`'s edge on
    /// the way to `q`. For a vertex point this is the vertex itself.
    /// Never tied: edge offsets are strictly interior.
    fn anchor_toward(&self, p: &TreePoint<S>, q: &TreePoint<S>) -> usize {
        match p {
            TreePoint::Vertex(a) => *a,
            TreePoint::Edge { edge, offset } => {
                let e = &self.edges[*edge];
                let via_u = offset.clone() + self.vertex_to_point(e.u, q);
                let via_v = (e.len.clone() - offset.clone()) + self.vertex_to_point(e.v, q);
                if via_u <= via_v {
                    e.u
                } else {
                    e.v
                }
            }
        }
    }

    pub fn geodesic(&self, p: &TreePoint<S>, q: &TreePoint<S>) -> Geodesic<S> {
        let len = self.distance(p, q);
        let same_edge = match (p, q) {
            (TreePoint::Edge { edge: e, .. }, TreePoint::Edge { edge: f, .. }) => e == f,
            _ => false,
        };
        let verts = if same_edge {
            Vec::new()
        } else {
            let a = self.anchor_toward(p, q);
            let b = self.anchor_toward(q, p);
            self.vertex_path(a, b)
        };
        Geodesic { p: p.clone(), q: q.clone(), verts, len }
    }

    /// Point at arclength `t` from `g.p` along `g`; `0 <= t <= g.len`
    /// up to the scalar's default tolerance.
    pub fn point_at(&self, g: &Geodesic<S>, t: &S) -> Result<TreePoint<S>, TreeError> {
        let zero = S::zero();
        let tol = S::default_tol();
        if !zero.le_within(t, &tol) || !t.le_within(&g.len, &tol) {
            return Err(TreeError::ArcOutOfRange);
        }
        let t = if *t < zero {
            zero.clone()
        } else if *t > g.len {
            g.len.clone()
        } else {
            t.clone()
        };
        if g.verts.is_empty() {
            // Both endpoints interior to one edge.
            let (e, a, b) = match (&g.p, &g.q) {
                (TreePoint::Edge { edge: e, offset: a }, TreePoint::Edge { offset: b, .. }) => (*e, a, b),
                _ => return Err(TreeError::Internal("vertexless geodesic without edge endpoints".into())),
            };
            let off = if b >= a { a.clone() + t } else { a.clone() - t };
            return self.point_on_edge(e, off);
        }
        let mut remaining = t;
        if let TreePoint::Edge { edge, offset } = &g.p {
            let e = &self.edges[*edge];
            let w = g.verts[0];
            let (dist_to_w, toward_u) = if w == e.u {
                (offset.clone(), true)
            } else {
                (e.len.clone() - offset.clone(), false)
            };
            if remaining <= dist_to_w {
                let off =
                    if toward_u { offset.clone() - remaining } else { offset.clone() + remaining };
                return self.point_on_edge(*edge, off);
            }
            remaining = remaining - dist_to_w;
        }
        for w in g.verts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let e = self
                .edge_between(a, b)
                .ok_or_else(|| TreeError::Internal("broken geodesic vertex chain".into()))?;
            let el = self.edges[e].len.clone();
            if remaining <= el {
                let off = if a == self.edges[e].u { remaining } else { el - remaining };
                return self.point_on_edge(e, off);
            }
            remaining = remaining - el;
        }
        let last = *g.verts.last().expect("nonempty verts");
        match &g.q {
            TreePoint::Vertex(_) => Ok(TreePoint::Vertex(last)),
            TreePoint::Edge { edge, .. } => {
                let e = &self.edges[*edge];
                let off = if last == e.u { remaining } else { e.len.clone() - remaining };
                self.point_on_edge(*edge, off)
            }
        }
    }

    /// `true` when `p` lies on `g` (within `tol`), by the exact metric
    /// criterion `d(g.p, p) + d(p, g.q) = len(g)`.
    pub fn contains(&self, g: &Geodesic<S>, p: &TreePoint<S>, tol: &S) -> bool {
        let through = self.distance(&g.p, p) + self.distance(p, &g.q);
        through.eq_within(&g.len, tol)
    }

    /// The median (Steiner point) of three points: the unique common
    /// point of the three pairwise geodesics. Symmetric in its
    /// arguments.
    pub fn median(
        &self,
        p: &TreePoint<S>,
        q: &TreePoint<S>,
        r: &TreePoint<S>,
    ) -> Result<TreePoint<S>, TreeError> {
        let alpha =
            (self.distance(p, q) + self.distance(p, r) - self.distance(q, r)).half();
        let g = self.geodesic(p, q);
        self.point_at(&g, &alpha)
    }

    /// Nearest point of `g` to `p`.
    pub fn project(&self, p: &TreePoint<S>, g: &Geodesic<S>) -> Result<TreePoint<S>, TreeError> {
        self.median(p, &g.p, &g.q)
    }

    /// Intersection of two geodesics. In a tree the gates
    /// `c1 = proj(g1.p, g2)` and `c2 = proj(g1.q, g2)` determine it:
    /// both on `g1` gives the segment `[c1, c2]`, a common gate off
    /// `g1` gives the empty intersection, and no other pattern occurs.
    pub fn intersect_geodesics(
        &self,
        g1: &Geodesic<S>,
        g2: &Geodesic<S>,
        tol: &S,
    ) -> Result<Intersection<S>, TreeError> {
        let c1 = self.project(&g1.p, g2)?;
        let c2 = self.project(&g1.q, g2)?;
        let on1 = self.contains(g1, &c1, tol);
        let on2 = self.contains(g1, &c2, tol);
        if on1 && on2 {
            if self.point_eq(&c1, &c2, tol) {
                Ok(Intersection::Point(c1))
            } else {
                Ok(Intersection::Segment(c1, c2))
            }
        } else if self.point_eq(&c1, &c2, tol) {
            Ok(Intersection::Empty)
        } else {
            // Unreachable with exact arithmetic; under floats a grazing
            // contact can land here, and empty is the safe answer.
            debug_assert!(!S::is_exact(), "projection gates disagree on an exact tree");
            Ok(Intersection::Empty)
        }
    }

    fn fresh_name(&self, base: &str) -> String {
        let mut name = base.to_string();
        while self.names.iter().any(|n| *n == name) {
            name.push('_');
        }
        name
    }

    /// Make `p` a vertex, splitting its edge when interior. Existing
    /// vertex and edge indices stay valid; the split edge keeps its
    /// index for the `u`-side half and the `v`-side half is appended.
    pub fn subdivide_at(&self, p: &TreePoint<S>, base_name: &str) -> (MetricTree<S>, Subdivision<S>) {
        match p {
            TreePoint::Vertex(v) => (self.clone(), Subdivision { vertex: *v, split: None }),
            TreePoint::Edge { edge, offset } => {
                let e = self.edges[*edge].clone();
                let w = self.names.len();
                let mut names = self.names.clone();
                names.push(self.fresh_name(base_name));
                let mut edges: Vec<(usize, usize, S)> =
                    self.edges.iter().map(|e| (e.u, e.v, e.len.clone())).collect();
                edges[*edge] = (e.u, w, offset.clone());
                edges.push((w, e.v, e.len.clone() - offset.clone()));
                let tree = MetricTree::new(names, edges).expect("subdivision keeps a valid tree");
                let split = Some(SplitEdge {
                    edge: *edge,
                    offset: offset.clone(),
                    new_vertex: w,
                    new_edge: tree.edges.len() - 1,
                });
                (tree, Subdivision { vertex: w, split })
            }
        }
    }

    /// Contract the vertex set `verts` (which must induce a connected
    /// subtree) to a single new vertex. Distances between points
    /// outside the contracted part shrink by exactly the length of the
    /// removed edges they used.
    pub fn contract_vertices(
        &self,
        verts: &[usize],
        merged_name: &str,
    ) -> Result<(MetricTree<S>, Contraction), TreeError> {
        if verts.is_empty() {
            return Err(TreeError::Internal("empty contraction set".into()));
        }
        let n = self.names.len();
        let mut in_set = vec![false; n];
        for &v in verts {
            if v >= n {
                return Err(TreeError::Internal("contraction vertex out of range".into()));
            }
            in_set[v] = true;
        }
        let mut vmap = vec![usize::MAX; n];
        let mut names = vec![self.fresh_name(merged_name)];
        for v in 0..n {
            if in_set[v] {
                vmap[v] = 0;
            } else {
                vmap[v] = names.len();
                names.push(self.names[v].clone());
            }
        }
        let mut emap = vec![None; self.edges.len()];
        let mut edges = Vec::new();
        for (idx, e) in self.edges.iter().enumerate() {
            if in_set[e.u] && in_set[e.v] {
                continue;
            }
            emap[idx] = Some(edges.len());
            edges.push((vmap[e.u], vmap[e.v], e.len.clone()));
        }
        let tree = MetricTree::new(names, edges)?;
        Ok((tree, Contraction { vmap, emap, merged: 0 }))
    }

    /// Distance matrix of a point tuple.
    pub fn pairwise(&self, points: &[TreePoint<S>]) -> Vec<Vec<S>> {
        points
            .iter()
            .map(|p| points.iter().map(|q| self.distance(p, q)).collect())
            .collect()
    }
}

/// Result of [`MetricTree::subdivide_at`]: the vertex realizing the
/// point, plus the data needed to remap old points into the new tree.
#[derive(Clone, Debug)]
pub struct Subdivision<S> {
    pub vertex: usize,
    split: Option<SplitEdge<S>>,
}

#[derive(Clone, Debug)]
struct SplitEdge<S> {
    edge: usize,
    offset: S,
    new_vertex: usize,
    new_edge: usize,
}

impl<S: Scalar> Subdivision<S> {
    pub fn remap(&self, p: &TreePoint<S>) -> TreePoint<S> {
        let Some(split) = &self.split else { return p.clone() };
        match p {
            TreePoint::Vertex(v) => TreePoint::Vertex(*v),
            TreePoint::Edge { edge, offset } if *edge == split.edge => {
                if *offset < split.offset {
                    TreePoint::Edge { edge: *edge, offset: offset.clone() }
                } else if *offset == split.offset {
                    TreePoint::Vertex(split.new_vertex)
                } else {
                    TreePoint::Edge {
                        edge: split.new_edge,
                        offset: offset.clone() - split.offset.clone(),
                    }
                }
            }
            other => other.clone(),
        }
    }
}

/// Result of [`MetricTree::contract_vertices`].
#[derive(Clone, Debug)]
pub struct Contraction {
    vmap: Vec<usize>,
    emap: Vec<Option<usize>>,
    pub merged: usize,
}

impl Contraction {
    pub fn remap<S: Scalar>(&self, p: &TreePoint<S>) -> TreePoint<S> {
        match p {
            TreePoint::Vertex(v) => TreePoint::Vertex(self.vmap[*v]),
            TreePoint::Edge { edge, offset } => match self.emap[*edge] {
                Some(e) => TreePoint::Edge { edge: e, offset: offset.clone() },
                None => TreePoint::Vertex(self.merged),
            },
        }
    }
}

/// One contraction performed by [`shrink_to_connected`].
#[derive(Clone, Debug)]
pub struct ShrinkStep<S> {
    /// Indices (into the diagonal list) of the pair whose connector was
    /// contracted.
    pub pair: (usize, usize),
    pub connector_len: S,
    /// Full distance matrix of the six points after the contraction.
    pub dist_after: Vec<Vec<S>>,
}

#[derive(Clone, Debug)]
pub struct ShrinkOutcome<S> {
    pub tree: MetricTree<S>,
    pub points: Vec<TreePoint<S>>,
    pub steps: Vec<ShrinkStep<S>>,
}

fn diagonal_geodesics<S: Scalar>(
    tree: &MetricTree<S>,
    points: &[TreePoint<S>],
) -> [Geodesic<S>; 3] {
    [
        tree.geodesic(&points[0], &points[3]),
        tree.geodesic(&points[1], &points[4]),
        tree.geodesic(&points[2], &points[5]),
    ]
}

fn diagonal_components<S: Scalar>(
    tree: &MetricTree<S>,
    diags: &[Geodesic<S>; 3],
    tol: &S,
) -> Result<[usize; 3], TreeError> {
    let mut comp = [0usize, 1, 2];
    for i in 0..3 {
        for j in (i + 1)..3 {
            if !tree.intersect_geodesics(&diags[i], &diags[j], tol)?.is_empty() {
                let (a, b) = (comp[i], comp[j]);
                if a != b {
                    for c in comp.iter_mut() {
                        if *c == b {
                            *c = a;
                        }
                    }
                }
            }
        }
    }
    Ok(comp)
}

/// Contract minimal connector arcs between components of the diagonal
/// union until the union `[p0 p3] ∪ [p1 p4] ∪ [p2 p5]` is connected.
///
/// Each contraction is a shortest bridge between two components; its
/// interior meets no diagonal, so the three diagonal distances are
/// preserved exactly and the other twelve distances never increase. At
/// most two contractions are needed.
pub fn shrink_to_connected<S: Scalar>(
    tree: &MetricTree<S>,
    points: &[TreePoint<S>],
    tol: &S,
) -> Result<ShrinkOutcome<S>, TreeError> {
    assert_eq!(points.len(), 6, "a configuration has six points");
    let mut tree = tree.clone();
    let mut points = points.to_vec();
    let mut steps = Vec::new();
    for round in 0..3 {
        let diags = diagonal_geodesics(&tree, &points);
        let comp = diagonal_components(&tree, &diags, tol)?;
        if comp.iter().all(|&c| c == comp[0]) {
            return Ok(ShrinkOutcome { tree, points, steps });
        }
        // Shortest bridge across any component boundary. Gates are the
        // projections of one segment onto the other; for disjoint
        // subtrees every point projects to the same gate.
        let mut best: Option<((usize, usize), TreePoint<S>, TreePoint<S>, S)> = None;
        for i in 0..3 {
            for j in (i + 1)..3 {
                if comp[i] == comp[j] {
                    continue;
                }
                let gi = tree.project(&diags[j].p, &diags[i])?;
                let gj = tree.project(&diags[i].p, &diags[j])?;
                let len = tree.distance(&gi, &gj);
                let better = match &best {
                    None => true,
                    Some((_, _, _, blen)) => len < *blen,
                };
                if better {
                    best = Some(((i, j), gi, gj, len));
                }
            }
        }
        let ((i, j), gate_i, gate_j, connector_len) =
            best.ok_or_else(|| TreeError::Internal("no bridge between components".into()))?;
        let (t1, sub1) = tree.subdivide_at(&gate_i, &format!("gate{round}a"));
        let mut pts: Vec<TreePoint<S>> = points.iter().map(|p| sub1.remap(p)).collect();
        let gate_j = sub1.remap(&gate_j);
        let (t2, sub2) = t1.subdivide_at(&gate_j, &format!("gate{round}b"));
        for p in pts.iter_mut() {
            *p = sub2.remap(p);
        }
        // Vertex indices survive subdivision, so sub1.vertex is valid in t2.
        let bridge = t2.vertex_path(sub1.vertex, sub2.vertex);
        let (t3, contraction) = t2.contract_vertices(&bridge, &format!("shrunk{round}"))?;
        for p in pts.iter_mut() {
            *p = contraction.remap(p);
        }
        let dist_after = t3.pairwise(&pts);
        steps.push(ShrinkStep { pair: (i, j), connector_len, dist_after });
        tree = t3;
        points = pts;
    }
    let diags = diagonal_geodesics(&tree, &points);
    let comp = diagonal_components(&tree, &diags, tol)?;
    if comp.iter().all(|&c| c == comp[0]) {
        Ok(ShrinkOutcome { tree, points, steps })
    } else {
        Err(TreeError::Internal("diagonal union still disconnected after three contractions".into()))
    }
}

/// Shape of a connected six-point configuration.
///
/// `hosts[h]` is set when diagonal `h` contains every pairwise
/// intersection of the diagonals; any such diagonal supports the
/// collinear construction. `center` is the single common point of all
/// three diagonals when the triple intersection is a point; it supports
/// the tripod construction.
#[derive(Clone, Debug)]
pub struct ConfigClass<S> {
    pub hosts: [bool; 3],
    pub center: Option<TreePoint<S>>,
}

impl<S> ConfigClass<S> {
    pub fn has_host(&self) -> bool {
        self.hosts.iter().any(|&h| h)
    }
}

/// Classify a configuration whose diagonal union is connected.
///
/// Returns [`TreeError::DisconnectedDiagonals`] when it is not; run
/// [`shrink_to_connected`] first.
pub fn classify_configuration<S: Scalar>(
    tree: &MetricTree<S>,
    points: &[TreePoint<S>],
    tol: &S,
) -> Result<ConfigClass<S>, TreeError> {
    assert_eq!(points.len(), 6, "a configuration has six points");
    let diags = diagonal_geodesics(tree, points);
    let comp = diagonal_components(tree, &diags, tol)?;
    if !comp.iter().all(|&c| c == comp[0]) {
        return Err(TreeError::DisconnectedDiagonals);
    }
    let inter01 = tree.intersect_geodesics(&diags[0], &diags[1], tol)?;
    let inter02 = tree.intersect_geodesics(&diags[0], &diags[2], tol)?;
    let inter12 = tree.intersect_geodesics(&diags[1], &diags[2], tol)?;
    let mut endpoints = inter01.endpoints();
    endpoints.extend(inter02.endpoints());
    endpoints.extend(inter12.endpoints());
    let mut hosts = [false; 3];
    for h in 0..3 {
        hosts[h] = endpoints.iter().all(|p| tree.contains(&diags[h], p, tol));
    }
    let mut center = None;
    if !inter01.is_empty() && !inter02.is_empty() && !inter12.is_empty() {
        let i01 = match &inter01 {
            Intersection::Point(p) => tree.geodesic(p, p),
            Intersection::Segment(a, b) => tree.geodesic(a, b),
            Intersection::Empty => unreachable!(),
        };
        match tree.intersect_geodesics(&i01, &diags[2], tol)? {
            Intersection::Point(o) => center = Some(o),
            Intersection::Segment(a, _) => {
                // A fat triple intersection always admits a host
                // diagonal, so a tripod is never required here; keep an
                // endpoint as a usable center anyway.
                debug_assert!(hosts.iter().any(|&h| h), "fat triple intersection without host");
                center = Some(a);
            }
            Intersection::Empty => {
                // Pairwise intersecting subtrees of a tree share a
                // point, so this only happens to floats near tangency.
                debug_assert!(!S::is_exact(), "Helly property violated on exact tree");
            }
        }
    }
    if !hosts.iter().any(|&h| h) && center.is_none() {
        return Err(TreeError::Internal("connected configuration with neither host nor center".into()));
    }
    Ok(ConfigClass { hosts, center })
}

/// Build a tree realizing an additive metric. Returns the tree and the
/// location of each labeled point (always a vertex). Distinct labels at
/// distance zero share a vertex.
pub fn tree_from_additive_metric<S: Scalar>(
    m: &FiniteMetric<S>,
    tol: &S,
) -> Result<(MetricTree<S>, Vec<TreePoint<S>>), TreeError> {
    validate_metric(m, tol).map_err(|e| TreeError::InvalidMetric(e.to_string()))?;
    if !crate::metric::is_additive(m, tol) {
        return Err(TreeError::NotAdditive);
    }
    let n = m.len();
    if n == 0 {
        return Err(TreeError::Empty);
    }
    let mut tree = MetricTree::new(vec![m.labels[0].clone()], Vec::new())?;
    let mut placed: Vec<TreePoint<S>> = vec![TreePoint::Vertex(0)];
    let mut steiner = 0usize;
    for x in 1..n {
        // Labels coinciding with an already placed one reuse its vertex.
        if let Some(j) = (0..x).find(|&j| m.d(x, j).eq_within(&S::zero(), tol)) {
            placed.push(placed[j].clone());
            continue;
        }
        let distinct: Vec<usize> = {
            let mut seen: Vec<usize> = Vec::new();
            for j in 0..x {
                if seen.iter().all(|&s| !tree.point_eq(&placed[s], &placed[j], tol)) {
                    seen.push(j);
                }
            }
            seen
        };
        let a = distinct[0];
        let (attach, leg) = if distinct.len() == 1 {
            (placed[a].clone(), m.d(x, a).clone())
        } else {
            // The attach point lies on [a, b*] for the farthest split b*.
            let mut best_alpha = S::zero();
            let mut best_b = distinct[1];
            for &b in &distinct[1..] {
                let alpha =
                    (m.d(x, a).clone() + m.d(a, b).clone() - m.d(x, b).clone()).half();
                if alpha > best_alpha {
                    best_alpha = alpha.clone();
                    best_b = b;
                }
            }
            let g = tree.geodesic(&placed[a], &placed[best_b]);
            let p = tree.point_at(&g, &best_alpha)?;
            let leg = m.d(x, a).clone() - best_alpha;
            (p, leg)
        };
        if leg.eq_within(&S::zero(), tol) {
            let (t2, sub) = tree.subdivide_at(&attach, &m.labels[x]);
            for p in placed.iter_mut() {
                *p = sub.remap(p);
            }
            placed.push(TreePoint::Vertex(sub.vertex));
            tree = t2;
        } else {
            let name = format!("s{steiner}");
            steiner += 1;
            let (t2, sub) = tree.subdivide_at(&attach, &name);
            for p in placed.iter_mut() {
                *p = sub.remap(p);
            }
            let w = t2.names.len();
            let mut names = t2.names.clone();
            names.push(t2.fresh_name(&m.labels[x]));
            let mut edges: Vec<(usize, usize, S)> =
                t2.edges.iter().map(|e| (e.u, e.v, e.len.clone())).collect();
            edges.push((sub.vertex, w, leg));
            tree = MetricTree::new(names, edges)?;
            placed.push(TreePoint::Vertex(w));
        }
    }
    Ok((tree, placed))
}
