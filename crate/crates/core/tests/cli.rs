use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

const ZERO_GRAPH: &str = r#"{"kind": "graph", "m": 3, "edges": ["zero", "zero", "zero"], "h": 0.0}"#;

fn gsturm(cmd: &str, dir: &Path, config: &Value) -> Output {
    let cfg = dir.join(format!("{cmd}.json"));
    std::fs::write(&cfg, serde_json::to_string_pretty(config).unwrap()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_gsturm"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join(format!("{cmd}_out")))
        .output()
        .unwrap()
}

fn forward_zero(dir: &Path, n: usize) -> std::path::PathBuf {
    let problem: Value = serde_json::from_str(ZERO_GRAPH).unwrap();
    let out = gsturm("forward", dir, &json!({"problem": problem, "N": n}));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("forward_out/spectral.json")
}

#[test]
fn unknown_config_field_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gsturm("forward", dir.path(), &json!({"problem": {"kind": "graph", "m": 2, "edges": ["zero", "zero"]}, "N": 2, "bogus": 1}));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[parse]"));
}

#[test]
fn forward_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = std::fs::read(forward_zero(a.path(), 3)).unwrap();
    let fb = std::fs::read(forward_zero(b.path(), 3)).unwrap();
    assert_eq!(fa, fb);
}

#[test]
fn zero_potential_inverse() {
    let dir = tempfile::tempdir().unwrap();
    let data = forward_zero(dir.path(), 6);
    let out = gsturm("inverse", dir.path(), &json!({"data": data, "mode": "graph", "mesh_points": 65}));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("inverse_out/reconstruction.json")).unwrap()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("inverse_out/reconstruction.csv")).unwrap();
    let worst = text
        .lines()
        .skip(1)
        .flat_map(|l| l.split(',').skip(1).map(|v| v.parse::<f64>().unwrap().abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "max |q| = {worst:e}");
    assert_eq!(rec["format_version"], 1);
}

#[test]
fn negative_weight_is_an_sd_violation() {
    let dir = tempfile::tempdir().unwrap();
    let path = forward_zero(dir.path(), 3);
    let mut data: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for row in data["entries"][0]["alpha"].as_array_mut().unwrap() {
        for z in row.as_array_mut().unwrap() {
            z[0] = json!(-z[0].as_f64().unwrap());
        }
    }
    std::fs::write(&path, data.to_string()).unwrap();
    let out = gsturm("inverse", dir.path(), &json!({"data": path, "mode": "graph"}));
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let out = gsturm("validate", dir.path(), &json!({"data": path, "mode": "graph"}));
    assert!(out.status.success());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("validate_out/validation.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
}

#[test]
fn large_perturbation_breaks_the_grouping() {
    let dir = tempfile::tempdir().unwrap();
    let problem: Value = serde_json::from_str(ZERO_GRAPH).unwrap();
    let cfg = json!({"problem": problem, "N": 5, "entry": [5, 1], "deltas": [0.45], "mesh_points": 33});
    let out = gsturm("stability", dir.path(), &cfg);
    assert_eq!(out.status.code(), Some(7), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn roundtrip_improves_with_n() {
    let dir = tempfile::tempdir().unwrap();
    let problem = json!({"kind": "graph", "m": 2, "edges": ["cos", "0.5*sin:2"], "h": 0.2});
    let out = gsturm("roundtrip", dir.path(), &json!({"problem": problem, "N": 6, "mesh_points": 65, "tolerances": {"diagonality": 1e-3}}));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("roundtrip_out/roundtrip.json")).unwrap()).unwrap();
    assert!(report["ratio"].as_f64().unwrap() < 1.0, "{report}");
}
