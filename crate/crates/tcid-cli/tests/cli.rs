//! Golden tests for the command-line interface: exact stdout bytes and the
//! exit-code contract (0 positive, 3 negative, 1 usage, 2 bad input).

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    p.display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcid"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn sep_separated_direction() {
    let g = fixture("asymmetry_graph.json");
    let out = run(&["sep", "--graph", &g, "--a", "a", "--b", "b", "--c", "c,I_a"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "{\"separated\":true}\n");
}

#[test]
fn sep_reversed_direction_is_negative() {
    let g = fixture("asymmetry_graph.json");
    let out = run(&["sep", "--graph", &g, "--a", "b", "--b", "a", "--c", "c,I_a"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stdout(&out), "{\"separated\":false}\n");
}

#[test]
fn sep_missing_graph_is_usage_error() {
    let out = run(&["sep", "--a", "a", "--b", "b"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).is_empty());
}

#[test]
fn malformed_json_reports_line_and_column() {
    let g = fixture("bad.json");
    let out = run(&["sep", "--graph", &g, "--a", "a", "--b", "b"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 2"), "{err}");
    assert!(err.contains("column"), "{err}");
}

#[test]
fn identify_bow_is_not_identifiable() {
    let g = fixture("bow_graph.json");
    let out = run(&["identify", "--graph", &g, "--treatment", "a", "--outcome", "b"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(
        stdout(&out),
        "{\"failing_district\":[\"b\"],\"status\":\"not_identifiable\"}\n"
    );
}

#[test]
fn identify_front_door_with_model_evaluates() {
    let g = fixture("front_door_graph.json");
    let m = fixture("front_door_model.json");
    let out = run(&[
        "identify",
        "--graph",
        &g,
        "--treatment",
        "a",
        "--outcome",
        "b",
        "--model",
        &m,
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("\"status\":\"identifiable\""));
    assert!(text.contains(
        "\"formula_string\":\"Σ_{x_c} φ_a(φ_c(P(x_V ‖ x_I))) · φ_a(φ_b(P(x_V ‖ x_I)))\""
    ));
    // Exact rational cells of the evaluated interventional kernel.
    assert!(text.contains("\"b=1\":\"337/540\""), "{text}");
    assert!(text.contains("\"b=1\":\"101/150\""), "{text}");
    // Byte-identical on a second run.
    let again = run(&[
        "identify",
        "--graph",
        &g,
        "--treatment",
        "a",
        "--outcome",
        "b",
        "--model",
        &m,
    ]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn verify_markov_chain_model() {
    let m = fixture("chain_model.json");
    let out = run(&["verify-markov", "--model", &m]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        stdout(&out),
        "{\"budget_exhausted\":false,\"checked\":64,\"sound\":true,\"total\":64,\"violations\":[]}\n"
    );
    let budgeted = run(&["verify-markov", "--model", &m, "--budget", "7"]);
    assert_eq!(budgeted.status.code(), Some(0));
    assert!(stdout(&budgeted).contains("\"budget_exhausted\":true"));
}

#[test]
fn calculus_rule_one_on_chain() {
    let m = fixture("chain_model.json");
    let out = run(&[
        "calculus", "--rule", "1", "--model", &m, "--a", "c", "--b", "a", "--d", "b",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        stdout(&out),
        "{\"counterexample\":null,\"equality_ok\":true,\"graphical_ok\":true,\"positivity_ok\":true,\"rule\":\"R1\"}\n"
    );
}

#[test]
fn calculus_inapplicable_rule_is_negative() {
    // The mediator is a descendant of the treatment: not an adjustment set.
    let m = fixture("front_door_model.json");
    let out = run(&[
        "calculus", "--rule", "backdoor", "--model", &m, "--a", "b", "--b", "a", "--f", "c",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("\"graphical_ok\":false"));
}

#[test]
fn calculus_unknown_rule_is_usage_error() {
    let m = fixture("chain_model.json");
    let out = run(&["calculus", "--rule", "4", "--model", &m]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fix_moves_node_to_inputs() {
    let g = fixture("front_door_graph.json");
    let out = run(&["fix", "--graph", &g, "--node", "c"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("\"fixable\":true"));
    assert!(text.contains("{\"id\":\"c\",\"kind\":\"input\"}"));
}

#[test]
fn fix_unfixable_node_is_negative() {
    let g = fixture("bow_graph.json");
    let out = run(&["fix", "--graph", &g, "--node", "a"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stdout(&out), "{\"fixable\":false}\n");
}

#[test]
fn demos_require_seed_when_randomized() {
    let out = run(&["demos", "--name", "positivity", "--out", "/tmp/tcid_pos.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn demo_no_pointwise_report() {
    let tmp = std::env::temp_dir().join("tcid_cli_np.json");
    let out = run(&["demos", "--name", "no-pointwise", "--out", tmp.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&tmp).unwrap()).unwrap();
    assert_eq!(report["ok"], serde_json::json!(true));
    assert_eq!(report["report"]["cases"][0]["tv_distance"], serde_json::json!(1.0));
}
