//! Browser bindings for the symred demo page. Every export takes plain
//! values or JSON text and returns a JSON string.

use serde::Serialize;
use symred::criticality::{verify_symmetric_criticality, CriticalityReport, VerifyOptions};
use symred::functionals::{EnergySpec, SpecJson};
use symred::models::{builtin, geometry_report, FullModel, GeometryReport, BUILTIN_NAMES};
use symred::solver::{minimize_on_constraint, SolveConfig, SolveResult};
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct GeometryCurves {
    pub t: Vec<f64>,
    pub density: Vec<f64>,
    /// `None` at singular endpoints.
    pub mean_curvature: Vec<Option<f64>>,
    pub report: GeometryReport,
}

#[derive(Debug, Serialize)]
pub struct SolveView {
    pub model: String,
    pub epsilon: f64,
    pub nodes: Vec<f64>,
    pub u: Vec<f64>,
    pub lambda_star: f64,
    pub theta: f64,
    pub energy: f64,
    pub target: f64,
    pub tangent_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub energy_trace: Vec<f64>,
}

impl SolveView {
    fn new(model: &str, result: &SolveResult) -> Self {
        Self {
            model: model.to_string(),
            epsilon: result.config.epsilon,
            nodes: result.u.grid().nodes().to_vec(),
            u: result.u.values().to_vec(),
            lambda_star: result.lambda_star,
            theta: result.theta,
            energy: result.energy,
            target: result.target,
            tangent_residual: result.tangent_grad_norm,
            iterations: result.iterations,
            converged: result.converged,
            energy_trace: result.energy_trace.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyView {
    pub solution: SolveView,
    pub report: CriticalityReport,
}

pub fn geometry_curves(model: &str, samples: usize) -> symred::Result<GeometryCurves> {
    let full = builtin(model)?;
    let q = &full.quotient;
    let samples = samples.max(3);
    let t: Vec<f64> = (0..samples).map(|k| q.length() * k as f64 / (samples - 1) as f64).collect();
    Ok(GeometryCurves {
        density: t.iter().map(|&s| q.density(s)).collect(),
        mean_curvature: t.iter().map(|&s| q.mean_curvature(s).ok()).collect(),
        report: geometry_report(q)?,
        t,
    })
}

fn run_solve(model: &str, spec: &str, epsilon: f64, grid: usize, max_iters: usize) -> symred::Result<(SolveResult, FullModel, EnergySpec)> {
    let full = builtin(model)?;
    let energy = SpecJson::from_json(spec)?.build(full.quotient.ambient_dim)?;
    let mut config = SolveConfig::new(epsilon, grid);
    config.max_iters = max_iters;
    let result = minimize_on_constraint(&energy, &full.quotient, &config)?;
    Ok((result, full, energy))
}

pub fn solve_view(model: &str, spec: &str, epsilon: f64, grid: usize, max_iters: usize) -> symred::Result<SolveView> {
    let (result, full, _) = run_solve(model, spec, epsilon, grid, max_iters)?;
    Ok(SolveView::new(full.name(), &result))
}

pub fn verify_view(model: &str, spec: &str, epsilon: f64, grid: usize, leaf: usize, dirs: usize, seed: u64) -> symred::Result<VerifyView> {
    let (result, full, energy) = run_solve(model, spec, epsilon, grid, SolveConfig::new(epsilon, grid).max_iters)?;
    let options = VerifyOptions::new(vec![leaf; full.leaf_coord_count()], dirs, seed);
    let report = verify_symmetric_criticality(&energy, &full, &result, &options)?;
    Ok(VerifyView { solution: SolveView::new(full.name(), &result), report })
}

fn to_js<T: Serialize>(value: symred::Result<T>) -> Result<String, JsValue> {
    let value = value.map_err(|e| JsValue::from_str(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Names of the built-in models as a JSON array.
#[wasm_bindgen(js_name = modelNames)]
pub fn model_names() -> String {
    serde_json::to_string(&BUILTIN_NAMES).unwrap_or_else(|_| "[]".into())
}

/// Density, mean curvature and the geometry checks for a built-in model.
#[wasm_bindgen]
pub fn geometry(model: &str, samples: usize) -> Result<String, JsValue> {
    to_js(geometry_curves(model, samples))
}

/// Constrained minimizer at one ε for a JSON energy spec.
#[wasm_bindgen]
pub fn solve(model: &str, spec: &str, epsilon: f64, grid: usize, max_iters: usize) -> Result<String, JsValue> {
    to_js(solve_view(model, spec, epsilon, grid, max_iters))
}

/// Solves, then tests the minimizer against non-basic directions.
#[wasm_bindgen]
pub fn verify(model: &str, spec: &str, epsilon: f64, grid: usize, leaf: usize, dirs: usize, seed: u64) -> Result<String, JsValue> {
    to_js(verify_view(model, spec, epsilon, grid, leaf, dirs, seed))
}
