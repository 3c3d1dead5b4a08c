use tbn::analysis::select_then_infer;
use tbn::circuit::{self, NodeKind};
use tbn::model::to_json;
use tbn::{compile, load_model, Evidence, SelectionMode};

const MODEL: &str = include_str!("fixtures/fig4.model.json");
const TAC: &str = include_str!("fixtures/fig4.tac.json");
const SIGMOID: &str = include_str!("fixtures/fig4.sigmoid.json");

#[test]
fn compiled_fig4_matches_golden_files() {
    let m = load_model(MODEL).unwrap();
    let tac = compile(&m, "B", &["A", "C"], SelectionMode::Threshold).unwrap();
    assert_eq!(circuit::to_json(&tac), TAC);
    let sig = compile(&m, "B", &["A", "C"], SelectionMode::Sigmoid { gamma: 16.0 }).unwrap();
    assert_eq!(circuit::to_json(&sig), SIGMOID);
}

#[test]
fn golden_circuit_round_trips() {
    for text in [TAC, SIGMOID] {
        let c = circuit::from_json(text).unwrap();
        assert_eq!(circuit::to_json(&c), text);
    }
}

#[test]
fn golden_circuit_counts() {
    let c = circuit::from_json(TAC).unwrap();
    let s = c.stats();
    assert_eq!((s.tests, s.thresholds), (4, 2));
    let dynamic = c.params().iter().filter(|p| p.name.starts_with("p+") || p.name.starts_with("p-")).count();
    assert_eq!(dynamic, 8);
    assert_eq!(s.params - dynamic, 6);
    // Each unit tests n_a = λ_a·θ_a against n·T.
    for n in c.node_ids().filter(|n| c.kind(*n) == NodeKind::Test) {
        let kids = c.children(n);
        let x = c.children(kids[0]);
        assert!(x.iter().any(|k| matches!(c.kind(*k), NodeKind::Evidence(_))));
        assert!(c.children(kids[1]).iter().any(|k| c.kind(*k) == NodeKind::Add));
    }
}

#[test]
fn golden_circuit_agrees_with_reference_semantics() {
    let m = load_model(MODEL).unwrap();
    let c = circuit::from_json(TAC).unwrap();
    for (a, cc) in [(0.2, 0.5), (0.5, 0.9), (0.8, 0.1), (1.0, 0.0)] {
        let ev = Evidence::new().binary("A", a).unwrap().binary("C", cc).unwrap();
        let got = tbn::evaluate(&c, &ev).unwrap();
        let want = select_then_infer(&m, &ev, "B").unwrap().joint;
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }
}

#[test]
fn model_round_trips() {
    let m = load_model(MODEL).unwrap();
    assert_eq!(load_model(&to_json(&m)).unwrap(), m);
}

fn err(text: &str) -> String {
    load_model(text).unwrap_err().to_string()
}

#[test]
fn malformed_models_are_rejected() {
    let unknown = MODEL.replacen("\"parents\": []", "\"parents\": [], \"extra\": 1", 1);
    assert!(err(&unknown).contains("extra"));
    let bad_sum = MODEL.replacen("[0.9, 0.1]", "[0.9, 0.2]", 1);
    assert!(err(&bad_sum).contains("sum"));
    let missing_row = MODEL.replacen(
        "{\"given\": [\"not_a\"], \"probs\": [0.5, 0.5]}",
        "{\"given\": [\"a\"], \"probs\": [0.5, 0.5]}",
        1,
    );
    assert_ne!(missing_row, MODEL);
    assert!(load_model(&missing_row).is_err());
    let bad_threshold = MODEL.replacen("\"threshold\": 0.5", "\"threshold\": 1.5", 1);
    assert!(load_model(&bad_threshold).is_err());
    let testing_root = MODEL.replacen(
        "{\"child\": \"A\", \"parents\": [], \"kind\": \"regular\", \"rows\": [{\"given\": [], \"probs\": [0.5, 0.5]}]}",
        "{\"child\": \"A\", \"parents\": [], \"kind\": \"testing\", \"rows\": [{\"given\": [], \"threshold\": 0.5, \"pos\": [0.5, 0.5], \"neg\": [0.5, 0.5]}]}",
        1,
    );
    assert_ne!(testing_root, MODEL);
    assert!(load_model(&testing_root).is_err());
    assert!(circuit::from_json(&TAC.replacen("\"version\": 1", "\"version\": 9", 1)).is_err());
}
