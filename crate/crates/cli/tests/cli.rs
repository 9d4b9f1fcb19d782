//! End-to-end tests of the binary: exit codes, the one-JSON-document
//! stdout contract, and determinism of repeated invocations.

use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_octacomp");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(BIN)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary spawns");
    child
        .stdin
        .take()
        .expect("stdin handle")
        .write_all(input.as_bytes())
        .expect("stdin accepts input");
    child.wait_with_output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const STAR: &str = r#"{
  "vertices": ["o", "p1", "p2", "p3"],
  "edges": [[0, 1, "3"], [0, 2, "3"], [0, 3, "3"]],
  "points": {
    "x":  {"edge": [0, 1], "offset": "1"},
    "y":  {"edge": [0, 2], "offset": "1"},
    "z":  {"edge": [0, 3], "offset": "1"},
    "x'": {"edge": [0, 3], "offset": "2"},
    "y'": {"edge": [0, 1], "offset": "2"},
    "z'": {"edge": [0, 2], "offset": "2"}
  }
}"#;

const ADDITIVE: &str = r#"{
  "labels": ["a", "b", "c", "d"],
  "dist": [["0","3","7","8"], ["3","0","6","7"], ["7","6","0","5"], ["8","7","5","0"]]
}"#;

const SQUASHED_C4: &str = r#"{
  "labels": ["a", "b", "c", "d"],
  "dist": [[0, 1, 2, 1], [1, 0, 1, 2], [2, 1, 0, 1], [1, 2, 1, 0]]
}"#;

#[test]
fn model_tree_star_succeeds() {
    let out = run_stdin(&["model-tree"], STAR);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["schema"], "octacomp.model/1");
    assert_eq!(v["verification"]["passed"], true);
    assert_eq!(v["model"]["dim"], 2);
    assert_eq!(v["model"]["labels"].as_array().unwrap().len(), 6);
    // Exact mode is the default for tree inputs: coordinates come out
    // as quadratic-field objects, not floats.
    let origin = &v["model"]["points"]["x"][0];
    assert!(origin.get("r").is_some(), "expected exact coordinate, got {origin}");
}

#[test]
fn check_c4_squashed_square_is_infeasible() {
    let out = run_stdin(&["--float", "check", "--graph", "c4"], SQUASHED_C4);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["schema"], "octacomp.check/1");
    assert_eq!(v["graph"], "c4");
    assert_eq!(v["report"]["verdict"], "infeasible");
}

#[test]
fn check_unit_square_is_feasible() {
    let square = r#"{
      "labels": ["a", "b", "c", "d"],
      "dist": [[0, 1, 1.4142135623730951, 1],
               [1, 0, 1, 1.4142135623730951],
               [1.4142135623730951, 1, 0, 1],
               [1, 1.4142135623730951, 1, 0]]
    }"#;
    let out = run_stdin(&["--float", "check", "--graph", "c4"], square);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["report"]["verdict"], "feasible");
}

#[test]
fn unknown_flag_is_a_json_usage_error() {
    let out = run(&["--definitely-not-a-flag", "validate"]);
    assert_eq!(code(&out), 1);
    let v = stdout_json(&out);
    assert_eq!(v["schema"], "octacomp.error/1");
    assert_eq!(v["error"]["kind"], "usage");
}

#[test]
fn help_and_version_are_plain_text() {
    let help = run(&["--help"]);
    assert_eq!(code(&help), 0);
    assert!(String::from_utf8_lossy(&help.stdout).contains("Usage:"));

    let version = run(&["--version"]);
    assert_eq!(code(&version), 0);
    assert!(String::from_utf8_lossy(&version.stdout).starts_with("octacomp"));
}

#[test]
fn validate_accepts_additive_metric() {
    let out = run_stdin(&["validate"], ADDITIVE);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["schema"], "octacomp.validate/1");
    assert_eq!(v["valid"], true);
    assert_eq!(v["additive"], true);
}

#[test]
fn validate_reports_broken_triangle_without_failing() {
    let broken = r#"{
      "labels": ["a", "b", "c"],
      "dist": [["0","1","5"], ["1","0","1"], ["5","1","0"]]
    }"#;
    let out = run_stdin(&["validate"], broken);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["valid"], false);
    assert!(v["reason"].as_str().unwrap().contains("triangle"));
}

#[test]
fn validate_rejects_malformed_json() {
    let out = run_stdin(&["validate"], "{ not json");
    assert_eq!(code(&out), 1);
    let v = stdout_json(&out);
    assert_eq!(v["schema"], "octacomp.error/1");
    assert_eq!(v["error"]["kind"], "parse");
}

#[test]
fn reconstruct_tree_round_trips_an_additive_metric() {
    let out = run_stdin(&["reconstruct-tree"], ADDITIVE);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["schema"], "octacomp.tree/1");
    let points = v["points"].as_object().unwrap();
    assert_eq!(points.len(), 4);
    assert!(v["tree"]["vertices"].as_array().unwrap().len() >= 4);
}

#[test]
fn reconstruct_tree_rejects_non_additive_metric() {
    let out = run_stdin(&["reconstruct-tree"], SQUASHED_C4);
    assert_eq!(code(&out), 1);
    let v = stdout_json(&out);
    assert_eq!(v["error"]["kind"], "not_additive");
}

#[test]
fn model_product_two_factors() {
    let product = r#"{
      "factors": [
        {
          "vertices": ["u0", "u1"],
          "edges": [[0, 1, "4"]],
          "points": {
            "x": {"vertex": 0}, "y": {"edge": [0,1], "offset": "2"}, "z": {"vertex": 1},
            "x'": {"vertex": 1}, "y'": {"edge": [0,1], "offset": "2"}, "z'": {"vertex": 0}
          }
        },
        {
          "vertices": ["v0", "v1"],
          "edges": [[0, 1, "2"]],
          "points": {
            "x": {"vertex": 0}, "y": {"vertex": 1}, "z": {"vertex": 0},
            "x'": {"vertex": 1}, "y'": {"vertex": 0}, "z'": {"vertex": 1}
          }
        }
      ]
    }"#;
    let out = run_stdin(&["model-product"], product);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["schema"], "octacomp.model/1");
    assert_eq!(v["traces"].as_array().unwrap().len(), 2);
    assert_eq!(v["verification"]["passed"], true);
    assert_eq!(v["model"]["dim"], 4);
}

#[test]
fn campaign_stdout_is_deterministic() {
    let spec = r#"{
      "campaign": "theorem",
      "generator": {"kind": "random_tree", "max_vertices": 8, "seed": 7},
      "trials": 5
    }"#;
    let a = run_stdin(&["campaign"], spec);
    let b = run_stdin(&["campaign"], spec);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout, "same spec, same seed, different stdout");
    let v = stdout_json(&a);
    assert_eq!(v["schema"], "octacomp.campaign/1");
    assert_eq!(v["report"]["trials"], 5);
    assert_eq!(v["report"]["passes"], 5);
    // Wall time would break byte-level determinism; it belongs on stderr.
    assert!(v["report"].get("wall_ms").is_none());
    assert!(String::from_utf8_lossy(&a.stderr).contains("ms"));
}

#[test]
fn campaign_seed_override_changes_instances() {
    let spec = r#"{
      "campaign": "question",
      "generator": {"kind": "euclidean_sample", "dim": 3, "scale": 1.0, "seed": 1},
      "trials": 3
    }"#;
    let a = run_stdin(&["campaign"], spec);
    let b = run_stdin(&["--seed", "999", "campaign"], spec);
    assert_eq!(code(&a), 0);
    assert_eq!(code(&b), 0);
    assert_eq!(stdout_json(&b)["seed"], 999);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn campaign_bad_spec_is_an_input_error() {
    let spec = r#"{"campaign": "theorem", "generator": {"kind": "random_tree", "max_vertices": 1, "seed": 0}, "trials": 2}"#;
    let out = run_stdin(&["campaign"], spec);
    assert_eq!(code(&out), 1);
    let v = stdout_json(&out);
    assert_eq!(v["error"]["kind"], "bad_spec");
}

#[test]
fn out_flag_writes_the_same_document() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("report.json");
    let input = dir.path().join("metric.json");
    std::fs::write(&input, ADDITIVE).expect("write input");

    let out = run(&[
        "validate",
        input.to_str().unwrap(),
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let on_disk: Value =
        serde_json::from_str(&std::fs::read_to_string(&path).expect("read out file"))
            .expect("out file is JSON");
    assert_eq!(on_disk, stdout_json(&out));
}

#[test]
fn missing_input_file_is_an_input_error() {
    let out = run(&["validate", "/definitely/not/here.json"]);
    assert_eq!(code(&out), 1);
    let v = stdout_json(&out);
    assert_eq!(v["schema"], "octacomp.error/1");
    assert_eq!(v["error"]["kind"], "io");
}
