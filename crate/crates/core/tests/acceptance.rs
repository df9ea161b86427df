//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod common;

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symred::averaging::*;
use symred::basic::*;
use symred::criticality::*;
use symred::functionals::*;
use symred::models::*;
use symred::solver::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn eligible_models() -> Vec<FullModel> {
    vec![make_flat_torus_model(3, 2).unwrap(), make_sphere_clifford_model()]
}

fn kirchhoff_spec() -> EnergySpec {
    common::kirchhoff(2.0, 2.0, 1.0, WeightJson::Power { exponent: 0.0 }).build(3).unwrap()
}

fn concave_spec(model: &FullModel) -> EnergySpec {
    let frequency = 2.0 * PI / model.quotient.length();
    common::concave_general(frequency).build(model.quotient.ambient_dim).unwrap()
}

fn exponents() -> Outcome {
    let start = Instant::now();
    let p_star = critical_exponent(3, 2.0).unwrap();
    let report = embedding_range(3, 2.0, 1).unwrap();
    let elapsed = start.elapsed();
    outcome(
        p_star == 6.0 && report.regime == EmbeddingRegime::AllExponents && elapsed < Duration::from_millis(1),
        format!("p* = {p_star}, regime = {:?}, {elapsed:?}", report.regime),
    )
}

fn geometry() -> Outcome {
    let start = Instant::now();
    let q = make_sphere_clifford_model().quotient;
    let h_mid = q.mean_curvature(PI / 4.0).unwrap();
    let neg_log_v = |t: f64| -q.density(t).ln();
    let points = [0.2, 0.5, 0.7, 1.1, 1.3];
    let errors: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&h| {
            points
                .iter()
                .map(|&t| ((neg_log_v(t + h) - neg_log_v(t - h)) / (2.0 * h) - q.mean_curvature(t).unwrap()).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let orders: Vec<f64> = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    let asym = q.leaf_volume_asymptotics(Endpoint::Left).unwrap();
    let asym_rel = (asym - 4.0 * PI * PI).abs() / (4.0 * PI * PI);
    let elapsed = start.elapsed();
    outcome(
        h_mid.abs() <= 1e-12 && orders.iter().all(|o| *o >= 1.9) && asym_rel <= 1e-4 && elapsed < Duration::from_secs(1),
        format!("h(pi/4) = {h_mid:e}, FD orders = {orders:.3?}, asymptotics rel err = {asym_rel:e}, {elapsed:?}"),
    )
}

fn derivative_exactness() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut worst_name = "";
    for (name, json) in common::presets() {
        let spec = json.build(3).unwrap();
        for (m, model) in eligible_models().into_iter().enumerate() {
            let grid = Arc::new(QuotientGrid::new(model.quotient, 61).unwrap());
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + m as u64);
            for _ in 0..20 {
                let u = common::smooth_random(&grid, &mut rng, 0.8, 0.3);
                let v = common::rough_random(&grid, &mut rng, -1.0, 1.0);
                let analytic = directional_derivative(&spec, &grid, &u, &v).unwrap().value;
                let scale = u.values().iter().fold(0.0f64, |a, x| a.max(x.abs()));
                let h = f64::EPSILON.cbrt() * scale;
                let at = |s: f64| {
                    let w: Vec<f64> = u.values().iter().zip(v.values()).map(|(a, b)| a + s * b).collect();
                    energy_value(&spec, &grid, &BasicFunction::new(grid.clone(), w).unwrap()).unwrap()
                };
                let fd = (at(h) - at(-h)) / (2.0 * h);
                let rel = (fd - analytic).abs() / analytic.abs();
                if rel > worst {
                    worst = rel;
                    worst_name = name;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-5 && elapsed < Duration::from_secs(5),
        format!("worst relative FD error {worst:e} ({worst_name}), {elapsed:?}"),
    )
}

fn torus_solve() -> Outcome {
    let start = Instant::now();
    let model = make_flat_torus_model(3, 2).unwrap();
    let result = minimize_on_constraint(&kirchhoff_spec(), &model.quotient, &SolveConfig::new(1.0, 2001)).unwrap();
    let elapsed = start.elapsed();
    let vol = (2.0 * PI).powi(3);
    let target = constraint_target(1.0, 2.0, 6.0).unwrap();
    let c = target.powf(1.0 / 6.0) / vol.powf(1.0 / 6.0);
    let dev = result.u.values().iter().map(|x| (x - c).abs()).fold(0.0, f64::max);
    outcome(
        result.converged
            && result.tangent_grad_norm <= 1e-10
            && result.lambda_star.abs() <= 1e-8
            && dev <= 1e-12 * c
            && elapsed < Duration::from_secs(10),
        format!(
            "tangent = {:e}, lambda* = {:e}, max |u - c| = {dev:e}, iters = {}, {elapsed:?}",
            result.tangent_grad_norm, result.lambda_star, result.iterations
        ),
    )
}

fn multiplier_formulas() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let eps: f64 = rng.gen_range(0.01..10.0);
        let theta: f64 = rng.gen_range(-3.0..3.0);
        let lambda: f64 = rng.gen_range(0.0..5.0);
        let r: f64 = rng.gen_range(0.5..4.0);
        let p_star: f64 = rng.gen_range(2.0..10.0);
        let a: f64 = rng.gen_range(0.1..5.0);
        let e = r / (r + 1.0);

        let first = lambda * (e * (eps * (r + 1.0)).ln()).exp();
        let oracle = first + theta * p_star;
        let got = lambda_star_kirchhoff(eps, theta, lambda, r, p_star);
        worst = worst.max((got - oracle).abs() / (first.abs() + (theta * p_star).abs()));

        let first = lambda / a * (r + 1.0) * (e * (a * eps).ln()).exp();
        let oracle = first + theta;
        let got = lambda_star_general(eps, theta, lambda, a, r);
        worst = worst.max((got - oracle).abs() / (first.abs() + theta.abs()));
    }
    outcome(worst <= 1e-14, format!("worst relative deviation {worst:e} over 100 inputs"))
}

fn criticality() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    for model in eligible_models() {
        let leaf = vec![64; model.leaf_coord_count()];
        for (label, spec) in [("kirchhoff", kirchhoff_spec()), ("concave", concave_spec(&model))] {
            let result = minimize_on_constraint(&spec, &model.quotient, &SolveConfig::new(1.0, 401)).unwrap();
            if !result.converged {
                pass = false;
                details.push(format!("{}/{label}: solve did not converge", model.name()));
                continue;
            }
            let report = verify_symmetric_criticality(&spec, &model, &result, &VerifyOptions::new(leaf.clone(), 8, 11)).unwrap();
            let pure = report.levels.iter().map(|l| l.max_pure_ratio).fold(0.0, f64::max);
            pass &= report.passed;
            details.push(format!(
                "{}/{label}: pure {pure:.1e}, order {}",
                model.name(),
                match report.refinement_order_estimate {
                    Some(o) => format!("{o:.3}"),
                    None => "exact at floor".into(),
                }
            ));
        }
    }
    let elapsed = start.elapsed();
    outcome(pass && elapsed < Duration::from_secs(60), format!("{}; {elapsed:?}", details.join("; ")))
}

fn gradient_is_basic() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (m, model) in eligible_models().into_iter().enumerate() {
        let grid = Arc::new(FullGrid::new(model.clone(), 101, &vec![32; model.leaf_coord_count()]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(70 + m as u64);
        let specs = [kirchhoff_spec(), concave_spec(&model)];
        for k in 0..10 {
            let b = common::smooth_random(grid.quotient(), &mut rng, 0.5, 0.4);
            worst = worst.max(gradient_is_basic_check(&specs[k % 2], &grid, &b).unwrap());
        }
    }
    let elapsed = start.elapsed();
    outcome(worst <= 1e-12 && elapsed < Duration::from_secs(30), format!("max deviation {worst:e}, {elapsed:?}"))
}

fn average_identity() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let models = eligible_models();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for k in 0..50 {
        let model = models[k % 2].clone();
        let grid = Arc::new(FullGrid::new(model, 33, &[12, 12]).unwrap());
        let q = grid.quotient();
        let b = common::smooth_random(q, &mut rng, 0.0, 1.0);
        let l1 = common::rough_random(q, &mut rng, -2.0, 2.0);
        let l2 = common::rough_random(q, &mut rng, -2.0, 2.0);
        let values = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = FullGridFunction::new(grid.clone(), values).unwrap();
        let l = symmetric_functional(&b, &l1, &l2, &f).unwrap();
        let residual = verify_average_identity(&b, &l1, &l2, &f).unwrap();
        worst = worst.max(residual / (l.abs() + 1.0));
    }
    let elapsed = start.elapsed();
    outcome(worst <= 1e-12 && elapsed < Duration::from_secs(30), format!("max residual/(|l|+1) {worst:e}, {elapsed:?}"))
}

fn solution_sequence() -> Outcome {
    let model = make_flat_torus_model(3, 2).unwrap();
    let spec = kirchhoff_spec();
    let epsilons = [0.5, 1.0, 2.0, 4.0, 8.0];
    let seq = solve_sequence(&spec, &model.quotient, &SolveConfig::new(1.0, 201), &epsilons).unwrap();
    let mut lambda_dev = 0.0f64;
    let mut masses = Vec::new();
    for member in &seq.members {
        let Ok(r) = &member.result else { return outcome(false, format!("solve at eps = {} failed", member.epsilon)) };
        let recomputed = lambda_star_kirchhoff(member.epsilon, r.theta, 1.0, 2.0, 6.0);
        lambda_dev = lambda_dev.max((r.lambda_star - recomputed).abs());
        masses.push(r.u.grid().lp_norm(&r.u, 6.0).unwrap());
    }
    let min_gap = masses.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    outcome(
        seq.all_converged() && seq.members.len() == 5 && min_gap >= 1e-6 && seq.min_mass_gap >= 1e-6 && lambda_dev <= 1e-14,
        format!(
            "converged = {}, min L^6 mass gap = {min_gap:.4e}, lambda* recomputation deviation = {lambda_dev:e}, {} workers",
            seq.all_converged(),
            seq.workers
        ),
    )
}

fn flow_invariance() -> Outcome {
    let mut worst = 0.0f64;
    for (m, model) in eligible_models().into_iter().enumerate() {
        let leaf = vec![16; model.leaf_coord_count()];
        let grid = Arc::new(FullGrid::new(model.clone(), 41, &leaf).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(100 + m as u64);
        let b = common::smooth_random(grid.quotient(), &mut rng, 0.6, 0.3);
        let w = Direction::random(&mut rng, &leaf, DirectionKind::Mixed).sample(&grid).unwrap();
        let shifts: Vec<(usize, i64)> = (0..leaf.len())
            .flat_map(|axis| [1, 2, 3, 5, 8, 13, -7, 16].map(|c| (axis, c)))
            .collect();
        for spec in [kirchhoff_spec(), concave_spec(&model)] {
            let report = flow_invariance_check(&spec, &grid, &b, &w, &shifts).unwrap();
            worst = worst.max(report.max_deviation / (1.0 + report.base_value.abs()));
        }
    }
    outcome(worst <= 1e-13, format!("max shift deviation/(1+|dJ|) {worst:e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("exponent arithmetic", exponents),
        ("geometry identities", geometry),
        ("derivative exactness", derivative_exactness),
        ("direct-method solve", torus_solve),
        ("multiplier formulas", multiplier_formulas),
        ("symmetric criticality", criticality),
        ("gradient is basic", gradient_is_basic),
        ("average identity", average_identity),
        ("solution sequence", solution_sequence),
        ("flow invariance", flow_invariance),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let result = run();
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} [{tag}] {name}: {}", k + 1, result.detail);
        if !result.pass {
            failures += 1;
        }
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
