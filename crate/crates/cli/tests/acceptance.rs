//! Acceptance sweep: ten numbered end-to-end checks over the whole
//! pipeline, printed one line each. Run with
//! `cargo test -p octacomp --test acceptance -- --nocapture` to watch
//! the lines appear; without `--nocapture` they show only on failure.

use std::io::Write;
use std::process::{Command, Stdio};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use octacomp_core::builder::{build_tree_model, BuildTrace, CaseTaken, TreeSixConfig};
use octacomp_core::feasibility::{
    check_comparison, psd_project, symmetric_eigen, FeasOptions, Verdict,
};
use octacomp_core::graphcmp::{
    constraints, cycle_graph, octahedron_graph, verify_model, O3_DIAGONALS,
};
use octacomp_core::harness::{
    generate_one, matching_labeling, run_question_campaign, run_theorem_campaign, CampaignReport,
    GeneratorKind, GeneratorSpec, Instance, LengthDistribution, TreeSpec,
};
use octacomp_core::io::metric_from_json;
use octacomp_core::metric::FiniteMetric;
use octacomp_core::num::{rat, Quad, Rat, Scalar};
use octacomp_core::tree::{MetricTree, TreePoint};

const BIN: &str = env!("CARGO_BIN_EXE_octacomp");

fn line(no: usize, label: &str, outcome: &Result<String, String>, secs: f64) {
    match outcome {
        Ok(detail) => println!("{no:>2}  {label:<42} pass  {detail} ({secs:.1}s)"),
        Err(detail) => println!("{no:>2}  {label:<42} FAIL  {detail} ({secs:.1}s)"),
    }
}

fn tree_cfg_to_f64(cfg: &TreeSixConfig<Rat>) -> TreeSixConfig<f64> {
    let edges: Vec<(usize, usize, f64)> = cfg
        .tree
        .edges()
        .iter()
        .map(|e| (e.u, e.v, e.len.to_f64()))
        .collect();
    let tree = MetricTree::new(cfg.tree.names().to_vec(), edges).expect("valid float tree");
    let points = cfg
        .points
        .iter()
        .map(|p| match p {
            TreePoint::Vertex(v) => TreePoint::Vertex(*v),
            TreePoint::Edge { edge, offset } => {
                TreePoint::Edge { edge: *edge, offset: offset.to_f64() }
            }
        })
        .collect();
    TreeSixConfig::new(tree, points).expect("six points")
}

/// Walk one build trace and check every intermediate distance matrix:
/// the three diagonals must equal their original values exactly, and no
/// other pair may ever grow from one stage to the next.
fn audit_chain(trace: &BuildTrace<Rat>, steps: &mut usize) -> Result<(), String> {
    let orig = &trace.initial_dist;
    let mut prev = orig.clone();
    let stages = trace
        .shrinks
        .iter()
        .map(|s| &s.dist_after)
        .chain(trace.moves.iter().map(|m| &m.dist_after));
    for (k, cur) in stages.enumerate() {
        *steps += 1;
        for (i, j) in O3_DIAGONALS {
            if cur[i][j] != orig[i][j] {
                return Err(format!("stage {k} moved diagonal ({i},{j})"));
            }
        }
        for i in 0..6 {
            for j in 0..i {
                if cur[i][j] > prev[i][j] {
                    return Err(format!("stage {k} stretched pair ({i},{j})"));
                }
            }
        }
        prev = cur.clone();
    }
    Ok(())
}

fn four_point_metric(sides: f64, diag: f64) -> FiniteMetric<f64> {
    let labels = ["a", "b", "c", "d"].map(String::from).to_vec();
    let dist = vec![
        vec![0.0, sides, diag, sides],
        vec![sides, 0.0, sides, diag],
        vec![diag, sides, 0.0, sides],
        vec![sides, diag, sides, 0.0],
    ];
    FiniteMetric::new(labels, dist)
}

fn e1_config() -> TreeSixConfig<Rat> {
    let names = vec!["o".into(), "p1".into(), "p2".into(), "p3".into()];
    let edges = vec![(0, 1, rat(3, 1)), (0, 2, rat(3, 1)), (0, 3, rat(3, 1))];
    let t = MetricTree::new(names, edges).expect("star");
    let at = |e: usize, k: i64| t.point_on_edge(e, rat(k, 1)).expect("on leg");
    let pts = vec![at(0, 1), at(1, 1), at(2, 1), at(2, 2), at(0, 2), at(1, 2)];
    TreeSixConfig::new(t, pts).expect("six points")
}

fn path_config() -> TreeSixConfig<Rat> {
    let t = MetricTree::new(vec!["u".into(), "v".into()], vec![(0, 1, rat(10, 1))])
        .expect("segment");
    let at = |k: i64| t.point_on_edge(0, rat(k, 1)).expect("inside");
    let pts = vec![TreePoint::Vertex(0), at(2), at(4), TreePoint::Vertex(1), at(8), at(6)];
    TreeSixConfig::new(t, pts).expect("six points")
}

fn report_value(rep: &CampaignReport) -> Value {
    let mut v = serde_json::to_value(rep).expect("report serializes");
    // Wall time is the one legitimately run-dependent field.
    v.as_object_mut().expect("object").remove("wall_ms");
    v
}

// 1 + 8: theorem soundness on random trees, and the reduction audit
// over the same corpus. One pass builds each instance in both scalar
// modes; the chain audit is timed separately so the build benchmark
// stays honest.
fn trees_and_reductions() -> (Result<String, String>, f64, Result<String, String>, f64) {
    let spec = GeneratorSpec {
        kind: GeneratorKind::RandomTree { max_vertices: 64, length: LengthDistribution::default() },
        seed: 11,
    };
    let mut collinear = 0usize;
    let mut steps = 0usize;
    let mut audit: Result<String, String> = Ok(String::new());
    let mut audit_secs = 0.0f64;
    let started = Instant::now();
    for trial in 0..1000u64 {
        let inst = match generate_one(&spec, trial) {
            Ok(Instance::Tree(cfg)) => cfg,
            Ok(_) => unreachable!("tree generator yields trees"),
            Err(e) => return (Err(format!("trial {trial}: generator: {e}")), 0.0, audit, 0.0),
        };
        let (_, trace) = match build_tree_model(&inst) {
            Ok(out) => out,
            Err(e) => return (Err(format!("trial {trial}: exact build: {e}")), 0.0, audit, 0.0),
        };
        if !trace.report.passed {
            return (Err(format!("trial {trial}: exact verification failed")), 0.0, audit, 0.0);
        }
        if matches!(trace.case, CaseTaken::Collinear { .. }) {
            collinear += 1;
            // Exact mode admits no tolerance, so a passing collinear
            // model has its tightest constraint exactly on the bound.
            if trace.report.min_slack != 0.0 {
                let s = trace.report.min_slack;
                return (Err(format!("trial {trial}: collinear slack {s:e}")), 0.0, audit, 0.0);
            }
        }
        let (_, ftrace) = match build_tree_model(&tree_cfg_to_f64(&inst)) {
            Ok(out) => out,
            Err(e) => return (Err(format!("trial {trial}: float build: {e}")), 0.0, audit, 0.0),
        };
        if !ftrace.report.passed || ftrace.report.min_slack < -1e-9 {
            let s = ftrace.report.min_slack;
            return (Err(format!("trial {trial}: float slack {s:e}")), 0.0, audit, 0.0);
        }

        let t0 = Instant::now();
        if audit.is_ok() {
            if let Err(e) = audit_chain(&trace, &mut steps) {
                audit = Err(format!("trial {trial}: {e}"));
            }
        }
        audit_secs += t0.elapsed().as_secs_f64();
    }
    let build_secs = started.elapsed().as_secs_f64() - audit_secs;
    let c1 = if build_secs < 10.0 {
        Ok(format!("1000/1000 both modes, {collinear} collinear"))
    } else {
        Err(format!("runtime {build_secs:.1}s over the 10s budget"))
    };
    let c8 = audit.map(|_| format!("0 violations across {steps} reduction steps"));
    (c1, build_secs, c8, audit_secs)
}

fn products() -> Result<String, String> {
    let mut total = 0usize;
    for (factors, trials, seed) in [(2usize, 167usize, 21u64), (3, 167, 22), (4, 166, 23)] {
        let spec = GeneratorSpec {
            kind: GeneratorKind::ProductOfTrees {
                factors: vec![
                    TreeSpec { max_vertices: 24, length: LengthDistribution::default() };
                    factors
                ],
            },
            seed,
        };
        let rep = run_theorem_campaign(&spec, trials, false).map_err(|e| e.to_string())?;
        if rep.failures > 0 || rep.passes != trials {
            return Err(format!("{factors}-factor products: {} failures", rep.failures));
        }
        match rep.min_slack {
            Some(s) if s >= -1e-9 => {}
            other => return Err(format!("{factors}-factor min slack {other:?}")),
        }
        total += rep.passes;
    }
    Ok(format!("{total}/500 verified over 2-4 factors"))
}

fn worked_tripod() -> Result<String, String> {
    let (model, trace) = build_tree_model(&e1_config()).map_err(|e| e.to_string())?;
    if !trace.report.passed {
        return Err("verification failed".into());
    }
    // Documented squared distances, rows in role order x y z x' y' z'.
    let want_sq = [
        (0, 1, 4.0), (0, 2, 4.0), (0, 3, 9.0), (0, 4, 1.0), (0, 5, 7.0),
        (1, 2, 4.0), (1, 3, 7.0), (1, 4, 9.0), (1, 5, 1.0),
        (2, 3, 1.0), (2, 4, 7.0), (2, 5, 9.0),
        (3, 4, 13.0), (3, 5, 13.0), (4, 5, 13.0),
    ];
    for (i, j, sq) in want_sq {
        let got = model.sq_dist(i, j).map_err(|e| e.to_string())?.to_f64().sqrt();
        if (got - f64::sqrt(sq)).abs() > 1e-12 {
            return Err(format!("pair ({i},{j}): {got} instead of sqrt({sq})"));
        }
    }
    Ok("15/15 distances match the documented model".into())
}

fn exact_path() -> Result<String, String> {
    let (model, trace) = build_tree_model(&path_config()).map_err(|e| e.to_string())?;
    if !matches!(trace.case, CaseTaken::Collinear { .. }) {
        return Err(format!("took the {:?} case", trace.case));
    }
    let want: Vec<Vec<Quad>> = [0i64, 2, 4, 10, 8, 6]
        .iter()
        .map(|&k| vec![Quad::from_rat(rat(k, 1))])
        .collect();
    if model.points != want {
        return Err(format!("coordinates {:?}", model.points));
    }
    Ok("line coordinates 0,2,4,6,8,10 reproduced exactly".into())
}

fn oracle_agreement() -> Result<String, String> {
    let spec = GeneratorSpec {
        kind: GeneratorKind::RandomTree { max_vertices: 64, length: LengthDistribution::default() },
        seed: 40,
    };
    let graph = octahedron_graph();
    let opts = FeasOptions::default();
    let roles = [0, 1, 2, 3, 4, 5];
    let mut worst = 0.0f64;
    for trial in 0..200u64 {
        let inst = match generate_one(&spec, trial) {
            Ok(Instance::Tree(cfg)) => cfg,
            Ok(_) => unreachable!("tree generator yields trees"),
            Err(e) => return Err(format!("trial {trial}: generator: {e}")),
        };
        let space = inst.metric().to_f64();
        let rep = check_comparison(&graph, &space, &roles, &opts).map_err(|e| e.to_string())?;
        if rep.verdict != Verdict::Feasible {
            return Err(format!("trial {trial}: verdict {:?}", rep.verdict));
        }
        let model = rep.model.ok_or_else(|| format!("trial {trial}: no witness"))?;
        // Independent re-check: the witness must stand on its own.
        let cs = constraints(&graph, &space, &roles).map_err(|e| e.to_string())?;
        let verif = verify_model(&cs, &model, &1e-9).map_err(|e| e.to_string())?;
        if !verif.passed {
            return Err(format!("trial {trial}: witness fails re-verification"));
        }
        worst = worst.max(rep.max_violation);
    }
    Ok(format!("200/200 certified, worst violation {worst:.1e}"))
}

fn planted_infeasibility() -> Result<String, String> {
    let graph = cycle_graph(4).map_err(|e| e.to_string())?;
    let roles = [0, 1, 2, 3];
    let opts = FeasOptions::default();
    let squashed = check_comparison(&graph, &four_point_metric(1.0, 2.0), &roles, &opts)
        .map_err(|e| e.to_string())?;
    if squashed.verdict != Verdict::Infeasible {
        return Err(format!("stretched square: {:?}", squashed.verdict));
    }
    let unit = check_comparison(
        &graph,
        &four_point_metric(1.0, f64::sqrt(2.0)),
        &roles,
        &opts,
    )
    .map_err(|e| e.to_string())?;
    if unit.verdict != Verdict::Feasible {
        return Err(format!("unit square: {:?}", unit.verdict));
    }
    if unit.max_violation > 1e-9 {
        return Err(format!("unit square violation {:.1e}", unit.max_violation));
    }
    Ok(format!(
        "squashed square infeasible, unit square feasible at {:.1e}",
        unit.max_violation
    ))
}

fn euclidean_control() -> Result<String, String> {
    let spec = GeneratorSpec { kind: GeneratorKind::EuclideanSample { dim: 3, scale: 1.0 }, seed: 5 };
    let rep = run_question_campaign(&spec, 1000).map_err(|e| e.to_string())?;
    if rep.passes != 1000 || rep.failures > 0 || rep.undecided > 0 {
        return Err(format!(
            "passes {} failures {} undecided {}",
            rep.passes, rep.failures, rep.undecided
        ));
    }
    match rep.min_slack {
        Some(s) if s >= -1e-9 => Ok(format!("1000/1000 labelings feasible, min slack {s:.1e}")),
        other => Err(format!("min slack {other:?}")),
    }
}

fn eigensolver() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst_recon = 0.0f64;
    let mut worst_ortho = 0.0f64;
    let mut worst_idem = 0.0f64;
    for round in 0..100 {
        let mut m = vec![vec![0.0f64; 6]; 6];
        for i in 0..6 {
            for j in 0..=i {
                let x = rng.gen_range(-5.0..5.0);
                m[i][j] = x;
                m[j][i] = x;
            }
        }
        let scale: f64 = m.iter().flatten().fold(0.0, |a, v| a.max(v.abs()));
        let (vals, vecs) = symmetric_eigen(&m).map_err(|e| e.to_string())?;
        for i in 0..6 {
            for j in 0..6 {
                let recon: f64 = (0..6).map(|k| vals[k] * vecs[k][i] * vecs[k][j]).sum();
                worst_recon = worst_recon.max((recon - m[i][j]).abs() / scale);
                let gram: f64 = (0..6).map(|k| vecs[i][k] * vecs[j][k]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst_ortho = worst_ortho.max((gram - target).abs());
            }
        }
        let p = psd_project(&m).map_err(|e| e.to_string())?;
        let pp = psd_project(&p).map_err(|e| e.to_string())?;
        for i in 0..6 {
            for j in 0..6 {
                worst_idem = worst_idem.max((pp[i][j] - p[i][j]).abs());
            }
        }
        if worst_recon > 1e-10 || worst_ortho > 1e-10 || worst_idem > 1e-10 {
            return Err(format!(
                "round {round}: reconstruction {worst_recon:.1e} orthonormality \
                 {worst_ortho:.1e} idempotence {worst_idem:.1e}"
            ));
        }
    }
    Ok(format!(
        "100 matrices, worst defects {worst_recon:.1e}/{worst_ortho:.1e}/{worst_idem:.1e}"
    ))
}

/// Re-run an Infeasible finding from its serialized instance and check
/// it reproduces; then confirm the CLI serializes the findings and
/// signals them through its exit code.
fn replay_findings(rep: &CampaignReport, spec_json: &Value) -> Result<(), String> {
    let graph = octahedron_graph();
    let opts = FeasOptions::default();
    for finding in rep.findings.iter().filter(|f| f.kind == "o3_infeasible").take(5) {
        let inst = finding
            .detail
            .get("instance")
            .ok_or_else(|| format!("trial {}: finding lacks an instance", finding.trial))?;
        let space: FiniteMetric<f64> = metric_from_json(inst).map_err(|e| e.to_string())?;
        let hits = finding
            .detail
            .get("hits")
            .and_then(Value::as_array)
            .ok_or_else(|| format!("trial {}: finding lacks hits", finding.trial))?;
        for hit in hits {
            let m: [(usize, usize); 3] =
                serde_json::from_value(hit.get("matching").cloned().unwrap_or(Value::Null))
                    .map_err(|e| format!("trial {}: bad matching: {e}", finding.trial))?;
            let labeling = matching_labeling(&m);
            let again = check_comparison(&graph, &space, &labeling, &opts)
                .map_err(|e| e.to_string())?;
            if again.verdict != Verdict::Infeasible {
                return Err(format!(
                    "trial {}: replay gave {:?}",
                    finding.trial, again.verdict
                ));
            }
        }
    }
    // The same campaign through the binary must exit 2 and carry the
    // findings in its JSON report.
    let mut child = Command::new(BIN)
        .args(["campaign", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    child
        .stdin
        .take()
        .expect("piped stdin")
        .write_all(spec_json.to_string().as_bytes())
        .map_err(|e| e.to_string())?;
    let out = child.wait_with_output().map_err(|e| e.to_string())?;
    if out.status.code() != Some(2) {
        return Err(format!("CLI exit {:?} despite findings", out.status.code()));
    }
    let doc: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let n = doc["report"]["findings"].as_array().map_or(0, Vec::len);
    if n == 0 {
        return Err("CLI report serialized no findings".into());
    }
    Ok(())
}

fn open_question_campaign() -> Result<String, String> {
    let spec = GeneratorSpec { kind: GeneratorKind::HyperbolicSample { max_radius: 2.0 }, seed: 271 };
    let trials = 10_000usize;
    let rep = run_question_campaign(&spec, trials).map_err(|e| e.to_string())?;
    let rerun = run_question_campaign(&spec, trials).map_err(|e| e.to_string())?;
    if report_value(&rep) != report_value(&rerun) {
        return Err("two runs under one seed disagree".into());
    }
    let slack = match rep.min_slack {
        Some(s) => s,
        None => return Err("report lists no min slack".into()),
    };
    if rep.undecided * 100 > trials {
        return Err(format!("{} of {trials} trials undecided", rep.undecided));
    }
    if rep.failures > 0 {
        let spec_json = serde_json::json!({
            "campaign": "question",
            "generator": serde_json::to_value(&spec).expect("spec serializes"),
            "trials": trials,
        });
        replay_findings(&rep, &spec_json)?;
    }
    Ok(format!(
        "{trials} trials deterministic, min slack {slack:.2e}, {} infeasible, {} undecided",
        rep.failures, rep.undecided
    ))
}

type Row = (usize, &'static str, Result<String, String>, f64);

fn run(rows: &mut Vec<Row>, no: usize, label: &'static str, f: fn() -> Result<String, String>) {
    let t0 = Instant::now();
    let outcome = f();
    let secs = t0.elapsed().as_secs_f64();
    line(no, label, &outcome, secs);
    rows.push((no, label, outcome, secs));
}

#[test]
fn acceptance() {
    let mut results: Vec<Row> = Vec::new();

    let (c1, c1_secs, c8, c8_secs) = trees_and_reductions();
    line(1, "tree models on 1000 random instances", &c1, c1_secs);
    results.push((1, "tree models on 1000 random instances", c1, c1_secs));

    run(&mut results, 2, "product models over 2-4 factors", products);
    run(&mut results, 3, "worked tripod instance", worked_tripod);
    run(&mut results, 4, "collinear instance is exact", exact_path);
    run(&mut results, 5, "builder and solver agree on 200 trees", oracle_agreement);
    run(&mut results, 6, "planted four-cycle pair", planted_infeasibility);
    run(&mut results, 7, "Euclidean control, all labelings", euclidean_control);

    line(8, "reduction invariants over the corpus", &c8, c8_secs);
    results.push((8, "reduction invariants over the corpus", c8, c8_secs));

    run(&mut results, 9, "eigensolver on 100 random matrices", eigensolver);
    run(&mut results, 10, "hyperbolic campaign, 10000 samples", open_question_campaign);

    let failed: Vec<String> = results
        .iter()
        .filter_map(|(no, label, outcome, _)| {
            outcome.as_ref().err().map(|e| format!("{no} {label}: {e}"))
        })
        .collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
