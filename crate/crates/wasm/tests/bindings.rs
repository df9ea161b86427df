use std::f64::consts::PI;

use symred_wasm::{geometry_curves, model_names, solve_view, verify_view};

const KIRCHHOFF: &str = r#"{"type":"kirchhoff","p":2,"r":2,"lambda":1,"weight":{"kind":"power","exponent":0}}"#;

const CONCAVE: &str = r#"{"type":"general","p":2,"r":1,"lambda":1,"a":2,
  "weight":{"kind":"constant","value":1},
  "lagrangian":{"preset":"dirichlet-mass","mass":1},
  "potential":{"preset":"weighted-power","q":1.5,"density":{"name":"cosine","amplitude":0.5,"frequency":4}}}"#;

#[test]
fn lists_models() {
    let names: Vec<String> = serde_json::from_str(&model_names()).unwrap();
    assert_eq!(names, ["flat-torus", "clifford", "latitude"]);
}

#[test]
fn geometry_curves_cover_the_quotient() {
    let curves = geometry_curves("clifford", 65).unwrap();
    assert_eq!(curves.t.len(), 65);
    assert!((curves.t[64] - PI / 2.0).abs() < 1e-15);
    assert!(curves.mean_curvature[0].is_none() && curves.mean_curvature[64].is_none());
    assert!(curves.mean_curvature[32].unwrap().abs() < 1e-12);
    assert!(curves.report.passed);
}

#[test]
fn solve_returns_profile_and_multiplier() {
    let view = solve_view("flat-torus", KIRCHHOFF, 1.0, 101, 2000).unwrap();
    assert!(view.converged);
    assert_eq!(view.nodes.len(), view.u.len());
    assert!(view.lambda_star.abs() < 1e-8);
    assert!(view.energy_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)));
}

#[test]
fn verify_reports_nonbasic_residuals() {
    let view = verify_view("clifford", CONCAVE, 1.0, 101, 16, 4, 0).unwrap();
    assert!(view.solution.converged);
    assert!(view.report.passed);
    assert_eq!(view.report.residual_per_direction.len(), 4);
}

#[test]
fn bad_spec_is_an_error() {
    assert!(solve_view("flat-torus", "{\"type\":\"nope\"}", 1.0, 51, 100).is_err());
    assert!(solve_view("latitude", KIRCHHOFF, 1.0, 51, 100).is_err());
}
