//! End-to-end tests of the command-line interface: flags, exit codes and
//! output formats.

use std::process::{Command, Output};

fn ccbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccbound"))
        .args(args)
        .env("CC_BOUND_SEED", "0")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn gen_emits_a_valid_correlation() {
    let out = ccbound(&["gen", "--scenario", "2322"]);
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(parsed["scenario"]["mA"], 2);
    assert_eq!(parsed["scenario"]["nB"], 2);
    // key-pair cell of the noiseless correlation
    let p = parsed["probs"][0][2][0][0].as_f64().unwrap();
    assert!((p - 0.5).abs() < 1e-12);
}

#[test]
fn gen_with_losses_grows_the_alphabet() {
    let out = ccbound(&["gen", "--scenario", "2333", "--eta", "0.9"]);
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(parsed["scenario"]["nA"], 3);
    let no_click = parsed["probs"][0][0][2][2].as_f64().unwrap();
    assert!((no_click - 0.01).abs() < 1e-12);
}

#[test]
fn gen_round_trips_external_input() {
    let dir = std::env::temp_dir().join(format!("ccbound-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("ext.json");
    let original = stdout(&ccbound(&["gen", "--scenario", "2233", "--visibility", "0.9"]));
    std::fs::write(&path, &original).unwrap();
    let out = ccbound(&["gen", "--input", path.to_str().unwrap()]);
    assert!(out.status.success());
    let a: serde_json::Value = serde_json::from_str(&original).unwrap();
    let b: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn malformed_input_exits_with_schema_code() {
    let dir = std::env::temp_dir().join(format!("ccbound-cli-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    std::fs::write(&path, "{\"scenario\": 7}").unwrap();
    let out = ccbound(&["gen", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    // signalling input also violates the schema
    let signalling = r#"{"scenario":{"mA":1,"mB":2,"nA":2,"nB":2},
        "probs":[[[[0.5,0.0],[0.0,0.5]],[[0.9,0.0],[0.0,0.1]]]]}"#;
    std::fs::write(&path, signalling).unwrap();
    let out = ccbound(&["gen", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn gen_supports_the_partially_entangled_family() {
    let out = ccbound(&["gen", "--scenario", "2333", "--theta", "0.7", "--eta", "0.9"]);
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(parsed["scenario"]["mB"], 3);
    assert_eq!(parsed["scenario"]["nA"], 3);
    // key pair (0, 2) of the lossy table: the double no-click cell
    let no_click = parsed["probs"][0][2][2][2].as_f64().unwrap();
    assert!((no_click - 0.01).abs() < 1e-12);
    // diagonal-dominant key correlation at moderate state angle
    let p00 = parsed["probs"][0][2][0][0].as_f64().unwrap();
    let p01 = parsed["probs"][0][2][0][1].as_f64().unwrap();
    assert!(p00 > 0.5 && p01 < 1e-9, "p00 = {p00}, p01 = {p01}");
}

#[test]
fn bound_reports_the_reference_point() {
    let out = ccbound(&["bound", "--scenario", "2333", "--eta", "0.9", "--strategy", "det", "--json"]);
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((parsed["bound"].as_f64().unwrap() - 0.0651161).abs() < 1e-6);
    assert!((parsed["local_weight"].as_f64().unwrap() - 0.6245584).abs() < 1e-6);
}

#[test]
fn bound_without_preprocessing_on_the_clean_point_is_one_bit() {
    let out = ccbound(&["bound", "--scenario", "2322", "--strategy", "none", "--json"]);
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((parsed["pa"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!(parsed["ec"].as_f64().unwrap().abs() < 1e-6);
    assert!((parsed["bound"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn two_way_bound_matches_the_closed_form() {
    let out = ccbound(&["bound", "--scenario", "2333", "--eta", "0.9", "--two-way", "--json"]);
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((parsed["two_way_bound"].as_f64().unwrap() - 0.1356960).abs() < 1e-6);
}

#[test]
fn custom_eve_map_is_accepted() {
    let dir = std::env::temp_dir().join(format!("ccbound-cli-map-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("map.json");
    // identity on five symbols
    let rows: Vec<Vec<f64>> = (0..5)
        .map(|r| (0..5).map(|c| if r == c { 1.0 } else { 0.0 }).collect())
        .collect();
    std::fs::write(&path, serde_json::json!({ "matrix": rows }).to_string()).unwrap();
    let out = ccbound(&[
        "bound", "--scenario", "2333", "--eta", "0.9", "--two-way", "--eve-map",
        path.to_str().unwrap(), "--json",
    ]);
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    // identity map leaves Eve with the nonlocal fraction
    assert!((parsed["two_way_bound"].as_f64().unwrap() - 0.3754416).abs() < 1e-6);
}

#[test]
fn threshold_finds_the_reference_value() {
    let out = ccbound(&["threshold", "--strategy", "det", "--scenario", "2333", "--noise", "eta"]);
    assert!(out.status.success());
    let value: f64 = stdout(&out).trim().parse().unwrap();
    assert!((value - 0.891586).abs() < 1e-4);
}

#[test]
fn threshold_rejects_mismatched_noise() {
    let out = ccbound(&["threshold", "--strategy", "det", "--scenario", "2333", "--noise", "visibility"]);
    assert!(!out.status.success());
}

#[test]
fn sweep_emits_csv_with_header() {
    let out = ccbound(&["sweep", "--theta-grid", "3", "--strategies", "det"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "theta,strategy,eta_crit,phiA,bound_at_crit_plus_eps");
    assert_eq!(lines.count(), 3);
}

#[test]
fn sweep_output_is_deterministic() {
    let a = stdout(&ccbound(&["sweep", "--theta-grid", "3", "--strategies", "det"]));
    let b = stdout(&ccbound(&["sweep", "--theta-grid", "3", "--strategies", "det"]));
    assert_eq!(a, b);
}

#[test]
fn reproduce_table1_passes_and_is_deterministic() {
    let first = ccbound(&["reproduce", "table1", "--restarts", "12"]);
    assert_eq!(first.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&first.stderr));
    let second = ccbound(&["reproduce", "table1", "--restarts", "12"]);
    assert_eq!(stdout(&first), stdout(&second));
    let text = stdout(&first);
    assert!(text.starts_with("section,scenario,"));
    assert!(text.contains("efficiency,2333,85.36,"));
}

#[test]
fn reproduce_fig3_emits_rate_rows() {
    let out = ccbound(&[
        "reproduce", "fig3", "--eta-grid", "0.70:0.70:0.01", "--restarts", "6",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "eta,theta,q,bound");
    let row = lines.next().unwrap();
    assert!(row.starts_with("0.7000,"));
}

#[test]
fn unknown_reproduction_target_fails() {
    let out = ccbound(&["reproduce", "table9"]);
    assert_eq!(out.status.code(), Some(1));
}
