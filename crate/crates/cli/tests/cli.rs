use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const KIRCHHOFF: &str = r#"{"type":"kirchhoff","p":2,"r":2,"lambda":1,"weight":{"kind":"power","exponent":0}}"#;

const CONCAVE: &str = r#"{"type":"general","p":2,"r":1,"lambda":1,"a":2,
  "weight":{"kind":"constant","value":1},
  "lagrangian":{"preset":"dirichlet-mass","mass":1},
  "potential":{"preset":"weighted-power","q":1.5,"density":{"name":"cosine","amplitude":0.5,"frequency":4}}}"#;

fn symred(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symred"))
        .current_dir(dir)
        .env_remove("SYMRED_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn json_stderr(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn workdir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("kirchhoff.json"), KIRCHHOFF).unwrap();
    fs::write(dir.path().join("concave.json"), CONCAVE).unwrap();
    dir
}

#[test]
fn models_lists_builtins() {
    let dir = workdir();
    let out = symred(dir.path(), &["models"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = json_stdout(&out);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let clifford = rows.iter().find(|r| r["name"] == "clifford").unwrap();
    assert!((clifford["closed_form_volume"].as_f64().unwrap() - 2.0 * PI * PI).abs() < 1e-12);
    let latitude = rows.iter().find(|r| r["name"] == "latitude").unwrap();
    assert_eq!(latitude["eligible"], false);
}

#[test]
fn geometry_checks() {
    let dir = workdir();
    let out = symred(dir.path(), &["geometry", "--model", "clifford"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json_stdout(&out);
    assert!(report["mean_curvature_at_midpoint"].as_f64().unwrap().abs() < 1e-12);

    let out = symred(dir.path(), &["geometry", "--model", "latitude"]);
    assert_eq!(out.status.code(), Some(0));
    let limit = json_stdout(&out)["endpoints"][0]["limit"].as_f64().unwrap();
    assert!((limit - 2.0 * PI).abs() < 1e-6);
    assert!(dir.path().join("geometry.manifest.json").exists());
}

#[test]
fn geometry_rejects_wrong_singular_order() {
    let dir = workdir();
    let samples: Vec<[f64; 2]> = (0..=40)
        .map(|k| {
            let t = PI / 2.0 * k as f64 / 40.0;
            [t, 2.0 * PI * PI * (2.0 * t).sin()]
        })
        .collect();
    let model = serde_json::json!({
        "name": "corrupted",
        "n": 3,
        "d_star": 1,
        "domain": {"kind": "interval", "T": PI / 2.0, "endpoints": [
            {"kind": "singular-leaf", "order": 2}, {"kind": "singular-leaf", "order": 1}
        ]},
        "density_samples": samples,
    });
    fs::write(dir.path().join("model.json"), model.to_string()).unwrap();
    let out = symred(dir.path(), &["geometry", "--model-file", "model.json"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(json_stderr(&out)["error"], "verification");
}

#[test]
fn usage_errors_exit_2_with_json() {
    let dir = workdir();
    let out = symred(dir.path(), &["solve", "--model", "flat-torus", "--spec", "kirchhoff.json", "--eps", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json_stderr(&out)["error"], "usage");

    let out = symred(dir.path(), &["solve", "--model", "latitude", "--spec", "kirchhoff.json", "--eps", "1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = symred(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json_stderr(&out)["exit_code"], 2);
}

#[test]
fn non_convergence_exits_3() {
    let dir = workdir();
    let out = symred(
        dir.path(),
        &["solve", "--model", "clifford", "--spec", "concave.json", "--eps", "1", "--grid", "101", "--max-iters", "2"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json_stderr(&out)["error"], "numerical");
    assert_eq!(read_json(&dir.path().join("solution.json"))["converged"], false);
}

#[test]
fn solve_then_verify_round_trip() {
    let dir = workdir();
    let out = symred(dir.path(), &["solve", "--model", "flat-torus", "--spec", "kirchhoff.json", "--eps", "1", "--grid", "101"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let solution = read_json(&dir.path().join("solution.json"));
    for key in ["model", "spec_digest", "epsilon", "u", "theta", "lambda_star", "residuals", "energy", "iters", "converged"] {
        assert!(solution.get(key).is_some(), "missing {key}");
    }
    assert!(solution["lambda_star"].as_f64().unwrap().abs() < 1e-8);

    let out = symred(dir.path(), &["verify", "--solution", "solution.json", "--leaf", "16"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("verify.json"));
    assert_eq!(report["passed"], true);
    for level in report["levels"].as_array().unwrap() {
        assert!(level["max_pure_ratio"].as_f64().unwrap() <= 1e-10);
    }
}

#[test]
fn verify_non_constant_solution() {
    let dir = workdir();
    let out = symred(
        dir.path(),
        &["solve", "--model", "clifford", "--spec", "concave.json", "--eps", "1", "--grid", "101", "--out", "clifford.json"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = symred(dir.path(), &["verify", "--solution", "clifford.json", "--leaf", "16"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json_stdout(&out);
    assert!(summary["refinement_order_estimate"].as_f64().unwrap() >= 1.5);
}

#[test]
fn verify_rejects_tampered_spec() {
    let dir = workdir();
    symred(dir.path(), &["solve", "--model", "flat-torus", "--spec", "kirchhoff.json", "--eps", "1", "--grid", "51"]);
    let path = dir.path().join("solution.json");
    let mut solution = read_json(&path);
    solution["spec"]["lambda"] = serde_json::json!(2.0);
    fs::write(&path, solution.to_string()).unwrap();
    let out = symred(dir.path(), &["verify", "--solution", "solution.json", "--leaf", "8"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_summary_csv() {
    let dir = workdir();
    let out = symred(
        dir.path(),
        &["sweep", "--model", "flat-torus", "--spec", "kirchhoff.json", "--eps", "0.5,1,2,4,8", "--grid", "101", "--workers", "2"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    let targets: Vec<f64> = rows.iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(targets.windows(2).all(|w| w[1] > w[0]));
    assert!(rows.iter().all(|r| r.ends_with("true")));
    let manifest = read_json(&dir.path().join("sweep.manifest.json"));
    assert_eq!(manifest["workers"], 2);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 7);
}

#[test]
fn sweep_rejects_unsorted_eps() {
    let dir = workdir();
    let out = symred(dir.path(), &["sweep", "--model", "flat-torus", "--spec", "kirchhoff.json", "--eps", "1,1", "--grid", "51"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn outputs_are_reproducible_and_honour_out_dir_env() {
    let dir = workdir();
    let run = |sub: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_symred"))
            .current_dir(dir.path())
            .env("SYMRED_OUT_DIR", dir.path().join(sub))
            .args(["solve", "--model", "clifford", "--spec", "kirchhoff.json", "--eps", "2", "--grid", "61", "--seed", "9"])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read(dir.path().join(sub).join("solution.json")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = workdir();
    let config = serde_json::json!({
        "model": "flat-torus",
        "spec_file": "kirchhoff.json",
        "epsilons": [3.0],
        "grid": 41,
    });
    fs::write(dir.path().join("run.json"), config.to_string()).unwrap();
    let out = symred(dir.path(), &["solve", "--config", "run.json", "--grid", "51"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let solution = read_json(&dir.path().join("solution.json"));
    assert_eq!(solution["epsilon"], 3.0);
    assert_eq!(solution["u"]["grid"]["N"], 51);
}

#[test]
fn average_demo_passes() {
    let dir = workdir();
    let out = symred(dir.path(), &["average-demo", "--cases", "10"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_stdout(&out)["passed"], true);
}
