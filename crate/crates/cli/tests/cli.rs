use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const CHAIN: &str = r#"{
  "variables": [{"name": "A", "states": ["a", "not_a"]}, {"name": "B", "states": ["b", "not_b"]}],
  "cpts": [
    {"child": "A", "kind": "regular", "rows": [{"given": [], "probs": [0.6, 0.4]}]},
    {"child": "B", "parents": ["A"], "kind": "regular", "rows": [
      {"given": ["a"], "probs": [0.9, 0.1]},
      {"given": ["not_a"], "probs": [0.2, 0.8]}
    ]}
  ]
}"#;

const GATE: &str = r#"{
  "variables": [{"name": "E", "states": ["e", "not_e"]}, {"name": "T", "states": ["t", "not_t"]}],
  "cpts": [
    {"child": "E", "kind": "regular", "rows": [{"given": [], "probs": [0.5, 0.5]}]},
    {"child": "T", "parents": ["E"], "kind": "testing", "rows": [
      {"given": ["e"], "threshold": 0.3, "pos": [1.0, 0.0], "neg": [0.0, 1.0]},
      {"given": ["not_e"], "threshold": 0.7, "pos": [0.0, 1.0], "neg": [1.0, 0.0]}
    ]}
  ]
}"#;

fn tbn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tbn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = tbn(dir, args);
    assert!(
        out.status.success(),
        "tbn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    tbn(dir, args).status.code().expect("exit code")
}

fn setup() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("chain.json"), CHAIN).unwrap();
    fs::write(dir.path().join("gate.json"), GATE).unwrap();
    dir
}

/// Value printed for `VAR=state` by `tbn query`.
fn printed(stdout: &str, key: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key)?.strip_prefix('\t'))
        .unwrap_or_else(|| panic!("no `{key}` in {stdout}"))
        .parse()
        .unwrap()
}

#[test]
fn compile_then_query() {
    let dir = setup();
    let d = dir.path();
    let stats = ok(d, &["compile", "chain.json", "-q", "B", "-e", "A", "-o", "c.json"]);
    assert!(stats.starts_with("nodes "));
    let joint = ok(d, &["query", "c.json", "-e", "A=0.5", "--joint"]);
    assert!((printed(&joint, "B=b") - 0.31).abs() < 1e-12);
    let post = ok(d, &["query", "c.json", "-e", "A=0.5,0.5"]);
    assert!((printed(&post, "B=b") - 0.62).abs() < 1e-12);
    let over = ok(d, &["query", "c.json", "-e", "A=1", "--param", "p(B=b|A=a)=0.5", "--joint"]);
    assert!((printed(&over, "B=b") - 0.3).abs() < 1e-12);
}

#[test]
fn testing_query_switches_at_threshold() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["compile", "gate.json", "-q", "T", "-e", "E", "-o", "t.json"]);
    // Both rows turn T on when E=0.9 and off when E=0.1.
    let high = ok(d, &["query", "t.json", "-e", "E=0.9"]);
    assert!((printed(&high, "T=t") - 1.0).abs() < 1e-12);
    let low = ok(d, &["query", "t.json", "-e", "E=0.1"]);
    assert!(printed(&low, "T=t").abs() < 1e-12);
    ok(d, &["compile", "gate.json", "-q", "T", "-e", "E", "--sigmoid", "-o", "s.json"]);
    let soft = ok(d, &["query", "s.json", "-e", "E=0.5"]);
    let p = printed(&soft, "T=t");
    assert!(p > 0.0 && p < 1.0);
}

#[test]
fn bad_input_exits_with_usage_code() {
    let dir = setup();
    let d = dir.path();
    assert_eq!(code(d, &["compile", "missing.json", "-q", "B", "-o", "c.json"]), 2);
    fs::write(d.join("broken.json"), "{\"variables\": [").unwrap();
    assert_eq!(code(d, &["compile", "broken.json", "-q", "B", "-o", "c.json"]), 2);
    assert_eq!(code(d, &["compile", "chain.json", "-q", "Nope", "-o", "c.json"]), 2);
    assert_eq!(code(d, &["no-such-command"]), 2);
    ok(d, &["compile", "chain.json", "-q", "B", "-e", "A", "-o", "c.json"]);
    assert_eq!(code(d, &["query", "c.json", "-e", "B=0.5"]), 2);
    assert_eq!(code(d, &["query", "c.json", "-e", "A"]), 2);
    assert_eq!(code(d, &["query", "c.json", "-e", "A=x"]), 2);
}

#[test]
fn approx_build_and_verify() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["approx", "build", "--function", "square", "-n", "20", "-o", "sq.json"]);
    let out = ok(d, &["approx", "verify", "sq.json", "--function", "square", "--bound", "0.05"]);
    assert!(out.starts_with("max error"));
    assert_eq!(code(d, &["approx", "verify", "sq.json", "--function", "square", "--bound", "0.001"]), 1);
    ok(d, &["approx", "build", "--function", "tent", "-n", "10", "--piecewise", "-o", "tent.json"]);
    ok(d, &["approx", "verify", "tent.json", "--function", "tent", "--bound", "0.2"]);
    assert_eq!(code(d, &["approx", "build", "--function", "bogus", "-n", "3", "-o", "x.json"]), 2);
}

#[test]
fn analyze_commands() {
    let dir = setup();
    let d = dir.path();
    let fit = ok(d, &["analyze", "multilinear", "chain.json", "-q", "B", "-e", "A"]);
    assert!(fit.contains("(multilinear)"), "{fit}");
    ok(d, &["approx", "build", "--function", "identity", "-n", "4", "-o", "id.json"]);
    let regions = ok(d, &["analyze", "regions", "id.json", "-q", "Y", "-e", "Z", "--resolution", "64"]);
    // Level 4 is on only at the single point x = 1.
    assert!(regions.starts_with("4 region(s)"), "{regions}");

    let net = r#"{"inputs": 2, "layers": [
        {"weights": [[1.0, -1.0], [0.5, 0.5]], "bias": [0.0, -0.25], "activation": "relu"},
        {"weights": [[1.0, 2.0]], "bias": [0.1], "activation": "linear"}
    ]}"#;
    fs::write(d.join("net.json"), net).unwrap();
    let out = ok(d, &["analyze", "relu2tac", "net.json", "-o", "net.circ.json", "--check", "0.75,-0.5"]);
    // relu(1.25) + 2·relu(-0.125) + 0.1
    assert!(out.contains("net     [1.35]"), "{out}");
    assert!(out.contains("circuit [1.35"), "{out}");
}

#[test]
fn train_and_experiment_write_outputs() {
    let dir = setup();
    let d = dir.path();
    let two = r#"{
  "variables": [
    {"name": "E1", "states": ["e1", "not_e1"]},
    {"name": "E2", "states": ["e2", "not_e2"]},
    {"name": "Q", "states": ["q", "not_q"]}
  ],
  "cpts": [
    {"child": "E1", "kind": "regular", "rows": [{"given": [], "probs": [0.5, 0.5]}]},
    {"child": "E2", "kind": "regular", "rows": [{"given": [], "probs": [0.5, 0.5]}]},
    {"child": "Q", "parents": ["E1", "E2"], "kind": "regular", "rows": [
      {"given": ["e1", "e2"], "probs": [0.5, 0.5]},
      {"given": ["e1", "not_e2"], "probs": [0.5, 0.5]},
      {"given": ["not_e1", "e2"], "probs": [0.5, 0.5]},
      {"given": ["not_e1", "not_e2"], "probs": [0.5, 0.5]}
    ]}
  ]
}"#;
    fs::write(d.join("two.json"), two).unwrap();
    ok(d, &["compile", "two.json", "-q", "Q", "-e", "E1,E2", "-o", "two.circ.json"]);
    let out = ok(
        d,
        &[
            "train", "two.circ.json", "--function", "f5", "--resolution", "8", "--epochs", "50", "--lr", "0.05", "-o",
            "fit.json", "--report", "report.json",
        ],
    );
    assert!(out.starts_with("best epoch"));
    assert!(d.join("fit.json").exists());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert!(report["validation_mse"].as_f64().unwrap() < 0.05);
    assert_eq!(code(d, &["train", "two.circ.json", "-o", "fit.json"]), 2);

    let summary = ok(
        d,
        &["experiment", "--function", "f5", "--k", "2", "--epochs", "5", "--resolution", "8", "--out", "runs"],
    );
    assert!(summary.lines().count() == 2, "{summary}");
    assert!(d.join("runs/f5-k2-layered-s0.metrics.json").exists());
    assert!(d.join("runs/f5-k2-layered-s0.surface.csv").exists());
}
