//! Constructive models for six-point tree configurations.
//!
//! Given six labeled points x, y, z, x', y', z' in a metric tree, this
//! module produces a Euclidean configuration (dimension at most 2) whose
//! distances are bounded above by the tree distances on the twelve
//! octahedron edges and below on the three diagonals. Products of trees
//! are handled by building one model per factor and concatenating
//! coordinate blocks; squared distances add, so the bounds survive.
//!
//! The construction follows a reduce-then-place strategy. Shrinking makes
//! the union of the three diagonals connected, a classification splits the
//! connected picture into a collinear case (everything relevant inside one
//! diagonal) and a tripod case (three diagonal overlaps radiating from a
//! center), and each case has a direct coordinate recipe. Rather than
//! normalizing the configuration analytically, [`build_tree_model`] tries
//! the recipes under all 48 relabelings that preserve the octahedron and
//! keeps the first result that verifies against the original distances.
//! Every reduction step only shrinks non-diagonal distances and preserves
//! diagonals, so a model for the reduced configuration is a model for the
//! input; the verifier enforces exactly that, which makes the search sound
//! even in the presence of a normalization bug.

use crate::graphcmp::{
    constraints, o3_automorphisms, octahedron_graph, verify_model, Constraint, ConstraintSet,
    GraphError, ModelConfiguration, Sense, VerificationReport, O3_DIAGONALS, O3_ROLES,
};
use crate::metric::FiniteMetric;
use crate::num::Scalar;
use crate::tree::{
    classify_configuration, shrink_to_connected, MetricTree, ShrinkStep, TreeError, TreePoint,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("a configuration needs exactly six points, got {0}")]
    SixPointsRequired(usize),
    #[error("the given center does not lie on all three diagonals")]
    NotTripod,
    #[error("neither point of a pair contains the other's center segment")]
    ContainmentRuleUnsatisfied,
    #[error("no orientation of the collinear coordinates verified")]
    VerificationFailedAllOrientations,
    #[error("a reduction step broke diagonal preservation or monotonicity")]
    ReductionInvariantViolated,
    #[error("a product configuration needs at least one factor")]
    EmptyProduct,
    #[error("all 48 relabelings exhausted without a verified model (internal bug)")]
    InternalExhaustion,
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Role labels in canonical order, as owned strings.
pub fn role_labels() -> Vec<String> {
    O3_ROLES.iter().map(|s| s.to_string()).collect()
}

/// Six labeled points in one metric tree, role order x, y, z, x', y', z'.
#[derive(Clone, Debug)]
pub struct TreeSixConfig<S: Scalar> {
    pub tree: MetricTree<S>,
    pub points: Vec<TreePoint<S>>,
}

impl<S: Scalar> TreeSixConfig<S> {
    pub fn new(tree: MetricTree<S>, points: Vec<TreePoint<S>>) -> Result<Self, BuildError> {
        if points.len() != 6 {
            return Err(BuildError::SixPointsRequired(points.len()));
        }
        Ok(TreeSixConfig { tree, points })
    }

    /// The 6x6 distance matrix of the configuration as a labeled space.
    pub fn metric(&self) -> FiniteMetric<S> {
        FiniteMetric::new(role_labels(), self.tree.pairwise(&self.points))
    }
}

/// Six roles placed in every factor of a product of trees.
#[derive(Clone, Debug)]
pub struct ProductSixConfig<S: Scalar> {
    pub factors: Vec<TreeSixConfig<S>>,
}

impl<S: Scalar> ProductSixConfig<S> {
    pub fn new(factors: Vec<TreeSixConfig<S>>) -> Result<Self, BuildError> {
        if factors.is_empty() {
            return Err(BuildError::EmptyProduct);
        }
        Ok(ProductSixConfig { factors })
    }
}

/// Which coordinate recipe produced the final model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CaseTaken {
    /// One-dimensional placement along a host diagonal. The flags record
    /// which of the two free diagonals had to be traversed in reverse.
    Collinear { flip_y: bool, flip_z: bool },
    /// Two-dimensional placement on the sides of a model triangle.
    Tripod,
}

/// One relocation performed while nesting a leg pair.
#[derive(Clone, Debug)]
pub struct MoveRecord<S: Scalar> {
    /// Role that moved, in the role order of the configuration handed to
    /// the call that produced this record.
    pub role: usize,
    pub from: TreePoint<S>,
    pub to: TreePoint<S>,
    /// Distance matrix of the six points right after this move.
    pub dist_after: Vec<Vec<S>>,
}

/// Certificate of one [`build_tree_model`] run.
///
/// The matrices let a caller re-check the two reduction invariants: after
/// every shrink and every move the three diagonal distances equal their
/// original values and the other twelve never increase.
#[derive(Clone, Debug)]
pub struct BuildTrace<S: Scalar> {
    pub initial_dist: Vec<Vec<S>>,
    /// (role, earlier role) pairs identified by the coincidence pre-pass.
    pub merges: Vec<(usize, usize)>,
    pub shrinks: Vec<ShrinkStep<S>>,
    /// Moves in original role indexing, matrices included.
    pub moves: Vec<MoveRecord<S>>,
    pub case: CaseTaken,
    /// The relabeling under which the case recipe succeeded; identity when
    /// the input was already in recipe position.
    pub automorphism: [usize; 6],
    /// Roles selected as the triangle corners a, b, c (tripod case only).
    pub abc: Option<[usize; 3]>,
    pub model: ModelConfiguration<S>,
    pub report: VerificationReport,
}

/// Leg pairing used by the tripod recipe: each diagonal endpoint is
/// coupled with the primed endpoint one diagonal over.
const LEG_PAIRS: [(usize, usize); 3] = [(0, 4), (1, 5), (2, 3)];

fn expect_six<S: Scalar>(points: &[TreePoint<S>]) -> Result<(), BuildError> {
    if points.len() != 6 {
        return Err(BuildError::SixPointsRequired(points.len()));
    }
    Ok(())
}

/// Nest every leg pair around `center`.
///
/// For each pair, when neither point's center segment contains the
/// other's, the point closer to the center moves onto the other point's
/// leg, keeping its distance to the center. That leaves the pair nested,
/// preserves all three diagonals (both endpoints keep their center
/// distance, and every diagonal runs through the center), and can only
/// shrink the remaining distances.
pub fn move_reduction<S: Scalar>(
    tree: &MetricTree<S>,
    points: &[TreePoint<S>],
    center: &TreePoint<S>,
    tol: &S,
) -> Result<(Vec<TreePoint<S>>, Vec<MoveRecord<S>>), BuildError> {
    expect_six(points)?;
    for (i, j) in O3_DIAGONALS {
        let g = tree.geodesic(&points[i], &points[j]);
        if !tree.contains(&g, center, tol) {
            return Err(BuildError::NotTripod);
        }
    }
    let mut pts = points.to_vec();
    let mut moves = Vec::new();
    for (u, v) in LEG_PAIRS {
        let gu = tree.geodesic(center, &pts[u]);
        let gv = tree.geodesic(center, &pts[v]);
        if tree.contains(&gv, &pts[u], tol) || tree.contains(&gu, &pts[v], tol) {
            continue;
        }
        let du = tree.distance(center, &pts[u]);
        let dv = tree.distance(center, &pts[v]);
        let (mover, target, radius) = if du.le_within(&dv, tol) {
            (u, &gv, du)
        } else {
            (v, &gu, dv)
        };
        let to = tree.point_at(target, &radius)?;
        let from = std::mem::replace(&mut pts[mover], to.clone());
        moves.push(MoveRecord {
            role: mover,
            from,
            to,
            dist_after: tree.pairwise(&pts),
        });
    }
    Ok((pts, moves))
}

/// Affine map from arclength along a tree geodesic to a model line,
/// pinned down by two anchors with known model positions.
struct LineMap<S: Scalar> {
    origin: Vec<S::MC>,
    dir: Vec<S::MC>,
    u0: S,
}

impl<S: Scalar> LineMap<S> {
    fn new(m1: &[S::MC], u1: S, m2: &[S::MC], u2: S, tol: &S) -> Self {
        let span = u2 - u1.clone();
        let dir = if span.abs_val().le_within(&S::zero(), tol) {
            // Coincident anchors leave the direction free: any unit vector
            // keeps the quadruple map distance-preserving, because every
            // model distance then runs through the shared anchor point.
            vec![S::one().mc_from(), S::mc_zero()]
        } else {
            let s = S::one() / span;
            (0..m1.len())
                .map(|k| S::mc_scale(&S::mc_sub(&m2[k], &m1[k]), &s))
                .collect()
        };
        LineMap {
            origin: m1.to_vec(),
            dir,
            u0: u1,
        }
    }

    fn eval(&self, u: &S) -> Vec<S::MC> {
        let t = u.clone() - self.u0.clone();
        (0..self.origin.len())
            .map(|k| S::mc_add(&self.origin[k], &S::mc_scale(&self.dir[k], &t)))
            .collect()
    }
}

/// Tripod-case recipe. Expects nested leg pairs (run [`move_reduction`]
/// first). Returns the model and the roles chosen as triangle corners.
///
/// Corner selection: a is x if x's center segment sits inside y''s,
/// otherwise y'; likewise b from (y, z') and c from (z, x'). The corners
/// then lie on two diagonals each, so placing the model triangle with the
/// corners' pairwise tree distances as side lengths and mapping each
/// diagonal onto its corner line by arclength preserves every diagonal
/// exactly, while the twelve edge bounds follow from the triangle
/// inequality along the corner lines.
pub fn build_tripod_model<S: Scalar>(
    tree: &MetricTree<S>,
    points: &[TreePoint<S>],
    center: &TreePoint<S>,
    tol: &S,
) -> Result<(ModelConfiguration<S>, [usize; 3]), BuildError> {
    expect_six(points)?;
    let select = |near: usize, far: usize| -> Result<usize, BuildError> {
        let g_far = tree.geodesic(center, &points[far]);
        if tree.contains(&g_far, &points[near], tol) {
            return Ok(near);
        }
        let g_near = tree.geodesic(center, &points[near]);
        if tree.contains(&g_near, &points[far], tol) {
            return Ok(far);
        }
        Err(BuildError::ContainmentRuleUnsatisfied)
    };
    let corners = [select(0, 4)?, select(1, 5)?, select(2, 3)?];
    let pa = &points[corners[0]];
    let pb = &points[corners[1]];
    let pc = &points[corners[2]];
    let lab = tree.distance(pa, pb);
    let lbc = tree.distance(pb, pc);
    let lac = tree.distance(pa, pc);

    let zero = S::zero();
    let origin = vec![S::mc_zero(), S::mc_zero()];
    let (ta, tb, tc);
    if lab.abs_val().le_within(&zero, tol) {
        // a and b coincide, so the triangle is a segment on the first axis.
        ta = origin.clone();
        tb = origin.clone();
        tc = vec![lac.mc_from(), S::mc_zero()];
    } else {
        let two = S::from_int(2);
        let cx = (lab.clone() * lab.clone() + lac.clone() * lac.clone()
            - lbc.clone() * lbc.clone())
            / (two * lab.clone());
        let mut cy2 = lac.clone() * lac.clone() - cx.clone() * cx.clone();
        if !S::is_exact() && cy2 < zero {
            cy2 = zero;
        }
        ta = origin.clone();
        tb = vec![lab.mc_from(), S::mc_zero()];
        tc = vec![cx.mc_from(), cy2.mc_sqrt()];
    }

    let place = |p: &TreePoint<S>,
                 pp: &TreePoint<S>,
                 anchor1: (&TreePoint<S>, &Vec<S::MC>),
                 anchor2: (&TreePoint<S>, &Vec<S::MC>)|
     -> Result<(Vec<S::MC>, Vec<S::MC>), BuildError> {
        let g = tree.geodesic(p, pp);
        if !tree.contains(&g, anchor1.0, tol) || !tree.contains(&g, anchor2.0, tol) {
            return Err(BuildError::ContainmentRuleUnsatisfied);
        }
        let u1 = tree.distance(p, anchor1.0);
        let u2 = tree.distance(p, anchor2.0);
        let line = LineMap::<S>::new(anchor1.1, u1, anchor2.1, u2, tol);
        Ok((line.eval(&S::zero()), line.eval(&g.len)))
    };

    let (mx, mxp) = place(&points[0], &points[3], (pa, &ta), (pc, &tc))?;
    let (my, myp) = place(&points[1], &points[4], (pa, &ta), (pb, &tb))?;
    let (mz, mzp) = place(&points[2], &points[5], (pb, &tb), (pc, &tc))?;
    let model = ModelConfiguration::new(role_labels(), vec![mx, my, mz, mxp, myp, mzp])?;
    Ok((model, corners))
}

/// Collinear-case recipe. Expects the host diagonal to be [x x'] in the
/// given role order.
///
/// Places x at 0 and x' at |x x'|, then drops each remaining pair onto the
/// line by the primed point's distance to x and the pair's own diagonal
/// length. Orientation of the two free pairs is not derived; all four
/// flip combinations are tried and the first one that verifies against
/// the configuration's own distances wins.
pub fn build_collinear_model<S: Scalar>(
    tree: &MetricTree<S>,
    points: &[TreePoint<S>],
    tol: &S,
) -> Result<(ModelConfiguration<S>, (bool, bool)), BuildError> {
    expect_six(points)?;
    let space = FiniteMetric::new(role_labels(), tree.pairwise(points));
    let cs = constraints(&octahedron_graph(), &space, &[0, 1, 2, 3, 4, 5])?;
    let d = |i: usize, j: usize| tree.distance(&points[i], &points[j]);
    for (flip_y, flip_z) in [(false, false), (true, false), (false, true), (true, true)] {
        let (y, yp) = if flip_y { (4, 1) } else { (1, 4) };
        let (z, zp) = if flip_z { (5, 2) } else { (2, 5) };
        let mut coord = vec![S::zero(); 6];
        coord[3] = d(0, 3);
        coord[yp] = d(yp, 0);
        coord[y] = coord[yp].clone() - d(yp, y);
        coord[zp] = d(zp, 0);
        coord[z] = coord[zp].clone() - d(zp, z);
        let model = ModelConfiguration::new(
            role_labels(),
            coord.iter().map(|c| vec![c.mc_from()]).collect(),
        )?;
        let report = verify_model(&cs, &model, tol)?;
        if report.passed {
            return Ok((model, (flip_y, flip_z)));
        }
    }
    Err(BuildError::VerificationFailedAllOrientations)
}

/// Check one reduction step: diagonals must equal their original values,
/// everything else must not exceed the previous step.
fn step_ok<S: Scalar>(prev: &[Vec<S>], cur: &[Vec<S>], original: &[Vec<S>], tol: &S) -> bool {
    for i in 0..6 {
        for j in (i + 1)..6 {
            if j == i + 3 {
                if !cur[i][j].eq_within(&original[i][j], tol) {
                    return false;
                }
            } else if !cur[i][j].le_within(&prev[i][j], tol) {
                return false;
            }
        }
    }
    true
}

fn unpermute_matrix<S: Clone>(m: &[Vec<S>], sigma: &[usize; 6]) -> Vec<Vec<S>> {
    let mut out = m.to_vec();
    for r in 0..6 {
        for s in 0..6 {
            out[sigma[r]][sigma[s]] = m[r][s].clone();
        }
    }
    out
}

fn unpermute_model<S: Scalar>(
    model: &ModelConfiguration<S>,
    sigma: &[usize; 6],
) -> Result<ModelConfiguration<S>, BuildError> {
    let mut pts = model.points.clone();
    for r in 0..6 {
        pts[sigma[r]] = model.points[r].clone();
    }
    ModelConfiguration::new(role_labels(), pts).map_err(Into::into)
}

/// Build a verified plane model for six points in one tree.
///
/// Pipeline: merge coincident roles, shrink until the diagonal union is
/// connected, classify once, then try the case recipes under each of the
/// 48 octahedron relabelings (identity first) until a candidate passes
/// verification against the original distances. The tripod recipe runs
/// first whenever a center exists; when all diagonal overlaps collapse to
/// a single point both recipes apply and the tripod one keeps the full
/// reduction trace. A passing model always exists, so exhaustion signals
/// a bug rather than a hard input.
pub fn build_tree_model<S: Scalar>(
    cfg: &TreeSixConfig<S>,
) -> Result<(ModelConfiguration<S>, BuildTrace<S>), BuildError> {
    expect_six(&cfg.points)?;
    let tol = S::default_tol();
    // Chain checks compare matrices across merge and shrink stages; in
    // float mode the merge pre-pass alone can move entries by two
    // tolerances, so give the bookkeeping a little more slack than the
    // final verification gets.
    let chain_tol = tol.clone() * S::from_int(4);
    let d0 = cfg.tree.pairwise(&cfg.points);
    let space0 = FiniteMetric::new(role_labels(), d0.clone());
    let cs0 = constraints(&octahedron_graph(), &space0, &[0, 1, 2, 3, 4, 5])?;

    // Coincident roles collapse onto one representative so the case
    // analysis below never sees two distinct points at distance zero.
    let mut pts = cfg.points.clone();
    let mut merges = Vec::new();
    for i in 0..6 {
        for j in 0..i {
            if cfg.tree.point_eq(&pts[i], &pts[j], &tol) {
                pts[i] = pts[j].clone();
                merges.push((i, j));
                break;
            }
        }
    }

    let shrunk = shrink_to_connected(&cfg.tree, &pts, &tol)?;
    let mut post_shrink = d0.clone();
    for st in &shrunk.steps {
        if !step_ok(&post_shrink, &st.dist_after, &d0, &chain_tol) {
            return Err(BuildError::ReductionInvariantViolated);
        }
        post_shrink = st.dist_after.clone();
    }
    let class = classify_configuration(&shrunk.tree, &shrunk.points, &tol)?;

    for sigma in o3_automorphisms() {
        let q: Vec<TreePoint<S>> = (0..6).map(|r| shrunk.points[sigma[r]].clone()).collect();

        if let Some(center) = &class.center {
            if let Ok((q2, raw_moves)) = move_reduction(&shrunk.tree, &q, center, &tol) {
                let mut chain_prev = post_shrink.clone();
                let mut recs = Vec::with_capacity(raw_moves.len());
                let mut chain_ok = true;
                for mv in raw_moves {
                    let m = unpermute_matrix(&mv.dist_after, &sigma);
                    if !step_ok(&chain_prev, &m, &d0, &chain_tol) {
                        chain_ok = false;
                        break;
                    }
                    chain_prev = m.clone();
                    recs.push(MoveRecord {
                        role: sigma[mv.role],
                        from: mv.from,
                        to: mv.to,
                        dist_after: m,
                    });
                }
                if chain_ok {
                    if let Ok((model_q, corners_q)) =
                        build_tripod_model(&shrunk.tree, &q2, center, &tol)
                    {
                        let model = unpermute_model(&model_q, &sigma)?;
                        let report = verify_model(&cs0, &model, &tol)?;
                        if report.passed {
                            let abc =
                                [sigma[corners_q[0]], sigma[corners_q[1]], sigma[corners_q[2]]];
                            let trace = BuildTrace {
                                initial_dist: d0,
                                merges,
                                shrinks: shrunk.steps,
                                moves: recs,
                                case: CaseTaken::Tripod,
                                automorphism: sigma,
                                abc: Some(abc),
                                model: model.clone(),
                                report,
                            };
                            return Ok((model, trace));
                        }
                    }
                }
            }
        }

        if class.hosts[sigma[0] % 3] {
            if let Ok((model_q, (flip_y, flip_z))) =
                build_collinear_model(&shrunk.tree, &q, &tol)
            {
                let model = unpermute_model(&model_q, &sigma)?;
                let report = verify_model(&cs0, &model, &tol)?;
                if report.passed {
                    let trace = BuildTrace {
                        initial_dist: d0,
                        merges,
                        shrinks: shrunk.steps,
                        moves: Vec::new(),
                        case: CaseTaken::Collinear { flip_y, flip_z },
                        automorphism: sigma,
                        abc: None,
                        model: model.clone(),
                        report,
                    };
                    return Ok((model, trace));
                }
            }
        }
    }
    Err(BuildError::InternalExhaustion)
}

/// O3 constraints of a product of six-point spaces: squared bounds add
/// across factors. Bounds are carried squared only; the verifier takes
/// square roots for display.
pub fn product_constraints<S: Scalar>(
    factors: &[FiniteMetric<S>],
) -> Result<ConstraintSet<S>, BuildError> {
    if factors.is_empty() {
        return Err(BuildError::EmptyProduct);
    }
    let graph = octahedron_graph();
    let mut items = Vec::new();
    for i in 0..6 {
        for j in (i + 1)..6 {
            let mut bound_sq = S::zero();
            for f in factors {
                let d = f.d(i, j).clone();
                bound_sq = bound_sq + d.clone() * d;
            }
            let sense = if graph.is_adjacent(i, j) {
                Sense::Upper
            } else {
                Sense::Lower
            };
            items.push(Constraint {
                i,
                j,
                sense,
                bound_sq,
                bound: None,
            });
        }
    }
    Ok(ConstraintSet {
        labels: role_labels(),
        items,
    })
}

/// Build a verified model for six points in a product of trees: one
/// model per factor, coordinate blocks concatenated.
pub fn build_product_model<S: Scalar>(
    cfg: &ProductSixConfig<S>,
) -> Result<(ModelConfiguration<S>, Vec<BuildTrace<S>>, VerificationReport), BuildError> {
    if cfg.factors.is_empty() {
        return Err(BuildError::EmptyProduct);
    }
    let tol = S::default_tol();
    let mut traces = Vec::with_capacity(cfg.factors.len());
    let mut blocks = Vec::with_capacity(cfg.factors.len());
    for factor in &cfg.factors {
        let (model, trace) = build_tree_model(factor)?;
        blocks.push(model);
        traces.push(trace);
    }
    let points: Vec<Vec<S::MC>> = (0..6)
        .map(|r| {
            blocks
                .iter()
                .flat_map(|m| m.points[r].iter().cloned())
                .collect()
        })
        .collect();
    let model = ModelConfiguration::new(role_labels(), points)?;
    let spaces: Vec<FiniteMetric<S>> = cfg.factors.iter().map(|f| f.metric()).collect();
    let cs = product_constraints(&spaces)?;
    let report = verify_model(&cs, &model, &tol)?;
    if !report.passed {
        // Per-factor models verified, so concatenation cannot fail unless
        // something is deeply wrong with the arithmetic.
        return Err(BuildError::InternalExhaustion);
    }
    Ok((model, traces, report))
}
