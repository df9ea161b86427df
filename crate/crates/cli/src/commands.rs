use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use symred::averaging::{symmetric_functional, verify_average_identity, FullGrid, FullGridFunction};
use symred::basic::{BasicFunction, BasicFunctionJson, QuotientGrid};
use symred::criticality::{verify_symmetric_criticality, VerifyOptions};
use symred::functionals::SpecJson;
use symred::models::{builtin, geometry_report, Domain, ModelFile, BUILTIN_NAMES};
use symred::solver::{minimize_on_constraint, solve_sequence, SolveConfig, SolveResult};

use crate::config::{resolve_model, spec_digest, ModelChoice, Problem, ResolvedModel, RunConfig};
use crate::output::{read_text, CliResult, Failure, Run};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Residuals {
    pub constraint: f64,
    pub tangent: f64,
    pub stationarity: f64,
}

/// The solution file written by `solve` and `sweep` and read by `verify`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionFile {
    pub model: String,
    pub spec_digest: String,
    pub epsilon: f64,
    pub u: BasicFunctionJson,
    pub theta: f64,
    pub lambda_star: f64,
    pub residuals: Residuals,
    pub energy: f64,
    pub iters: usize,
    pub converged: bool,
    pub target: f64,
    pub spec: SpecJson,
    pub config: SolveConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_file: Option<ModelFile>,
}

impl SolutionFile {
    fn new(problem: &Problem, result: &SolveResult) -> Self {
        Self {
            model: problem.model.model.name().to_string(),
            spec_digest: problem.spec_digest.clone(),
            epsilon: result.config.epsilon,
            u: result.u.to_json(),
            theta: result.theta,
            lambda_star: result.lambda_star,
            residuals: Residuals {
                constraint: result.constraint_residual,
                tangent: result.tangent_grad_norm,
                stationarity: result.stationarity_residual,
            },
            energy: result.energy,
            iters: result.iterations,
            converged: result.converged,
            target: result.target,
            spec: problem.spec_json.clone(),
            config: result.config.clone(),
            model_file: problem.model.file.clone(),
        }
    }

    fn into_result(self, grid: Arc<QuotientGrid>) -> CliResult<SolveResult> {
        Ok(SolveResult {
            u: self.u.into_function(grid)?,
            theta: self.theta,
            lambda_star: self.lambda_star,
            constraint_residual: self.residuals.constraint,
            tangent_grad_norm: self.residuals.tangent,
            stationarity_residual: self.residuals.stationarity,
            full_stationarity_residual: None,
            energy: self.energy,
            iterations: self.iters,
            converged: self.converged,
            energy_trace: Vec::new(),
            target: self.target,
            config: self.config,
        })
    }
}

fn print_json(value: &impl Serialize) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

#[derive(Serialize)]
struct ModelRow {
    name: String,
    n: usize,
    d_star: usize,
    domain: &'static str,
    length: f64,
    eligible: bool,
    closed_form_volume: Option<f64>,
    leaf_chart: bool,
}

pub fn models(text: bool) -> CliResult<()> {
    let rows: Vec<ModelRow> = BUILTIN_NAMES
        .iter()
        .map(|name| {
            let m = builtin(name)?;
            let q = &m.quotient;
            Ok(ModelRow {
                name: q.name.clone(),
                n: q.ambient_dim,
                d_star: q.min_leaf_dim,
                domain: match q.domain {
                    Domain::Circle { .. } => "circle",
                    Domain::Interval { .. } => "interval",
                },
                length: q.length(),
                eligible: q.is_eligible(),
                closed_form_volume: q.closed_form_volume(),
                leaf_chart: m.chart.is_some(),
            })
        })
        .collect::<CliResult<_>>()?;
    if !text {
        return print_json(&rows);
    }
    println!("{:<12} {:>2} {:>3} {:<9} {:>9} {:<9} {:>12}", "name", "n", "d*", "domain", "length", "eligible", "volume");
    for r in rows {
        let vol = r.closed_form_volume.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into());
        println!("{:<12} {:>2} {:>3} {:<9} {:>9.6} {:<9} {:>12}", r.name, r.n, r.d_star, r.domain, r.length, r.eligible, vol);
    }
    Ok(())
}

pub fn geometry(out_dir: &Path, choice: &ModelChoice, out: Option<&Path>) -> CliResult<()> {
    let config = serde_json::json!({ "model": choice.model, "model_file": choice.model_file });
    let mut run = Run::new("geometry", out_dir, &config)?;
    let resolved = resolve_model(choice)?;
    let report = geometry_report(&resolved.model.quotient)?;
    run.step("geometry", if report.passed { "passed" } else { "failed" });
    let path = run.path(out, "geometry.json");
    run.write_json(&path, &report)?;
    run.finish()?;
    print_json(&report)?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::verification(format!("geometry checks failed for '{}'", report.model)))
    }
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    output: String,
    model: &'a str,
    epsilon: f64,
    lambda_star: f64,
    theta: f64,
    energy: f64,
    tangent: f64,
    iters: usize,
    converged: bool,
}

pub fn solve(out_dir: &Path, cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let problem = cfg.resolve()?;
    if problem.epsilons.len() != 1 {
        return Err(Failure::usage("solve takes a single ε; use sweep for several"));
    }
    let mut run = Run::new("solve", out_dir, cfg)?;
    let result = minimize_on_constraint(&problem.spec, &problem.model.model.quotient, &problem.solve)?;
    run.step("solve", if result.converged { "converged" } else { "not converged" });
    let file = SolutionFile::new(&problem, &result);
    let path = run.path(out, "solution.json");
    run.write_json(&path, &file)?;
    run.finish()?;
    print_json(&SolveSummary {
        output: path.display().to_string(),
        model: &file.model,
        epsilon: file.epsilon,
        lambda_star: file.lambda_star,
        theta: file.theta,
        energy: file.energy,
        tangent: file.residuals.tangent,
        iters: file.iters,
        converged: file.converged,
    })?;
    if result.converged {
        Ok(())
    } else {
        Err(Failure::numerical(format!(
            "no convergence in {} iterations (tangent gradient norm {:e})",
            result.iterations, result.tangent_grad_norm
        )))
    }
}

pub fn sweep(out_dir: &Path, cfg: &RunConfig, workers: Option<usize>) -> CliResult<()> {
    let problem = cfg.resolve()?;
    let mut run = Run::new("sweep", out_dir, cfg)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(Failure::usage("--workers must be at least 1"));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| Failure::numerical(format!("cannot start workers: {e}")))?;
    let seq = pool.install(|| solve_sequence(&problem.spec, &problem.model.model.quotient, &problem.solve, &problem.epsilons))?;
    run.set_workers(seq.workers);

    let mut csv = String::from(
        "epsilon,constraint_target,lambda_star,theta,energy,constraint_residual,tangent_residual,stationarity_residual,iters,converged\n",
    );
    let mut failures = Vec::new();
    for (k, member) in seq.members.iter().enumerate() {
        match &member.result {
            Ok(result) => {
                run.step(format!("solve eps={}", member.epsilon), if result.converged { "converged" } else { "not converged" });
                if !result.converged {
                    failures.push(format!("ε = {} did not converge", member.epsilon));
                }
                let path = run.path(None, &format!("sweep_solution_{k:02}.json"));
                run.write_json(&path, &SolutionFile::new(&problem, result))?;
                writeln!(
                    csv,
                    "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{},{}",
                    member.epsilon,
                    result.target,
                    result.lambda_star,
                    result.theta,
                    result.energy,
                    result.constraint_residual,
                    result.tangent_grad_norm,
                    result.stationarity_residual,
                    result.iterations,
                    result.converged
                )
                .expect("writing to a String");
            }
            Err(message) => {
                run.step(format!("solve eps={}", member.epsilon), format!("error: {message}"));
                failures.push(format!("ε = {}: {message}", member.epsilon));
                writeln!(csv, "{:?},,,,,,,,,false", member.epsilon).expect("writing to a String");
            }
        }
    }
    let csv_path = run.path(None, "sweep_summary.csv");
    run.write_text(&csv_path, &csv)?;
    run.finish()?;
    print_json(&serde_json::json!({
        "summary": csv_path.display().to_string(),
        "members": seq.members.len(),
        "all_converged": seq.all_converged(),
        "min_mass_gap": seq.min_mass_gap,
        "min_distance": seq.min_distance,
        "workers": seq.workers,
    }))?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::numerical(failures.join("; ")))
    }
}

pub fn verify(out_dir: &Path, solution: &Path, leaf: usize, dirs: usize, seed: u64, out: Option<&Path>) -> CliResult<()> {
    let file: SolutionFile = serde_json::from_str(&read_text(solution)?)?;
    if spec_digest(&file.spec)? != file.spec_digest {
        return Err(Failure::usage("spec digest does not match the embedded spec"));
    }
    let config = serde_json::json!({ "solution": file.spec_digest, "leaf": leaf, "dirs": dirs, "seed": seed });
    let mut run = Run::new("verify", out_dir, &config)?;
    let model = ResolvedModel::rebuild(&file.model, file.model_file.as_ref())?;
    let spec = file.spec.build(model.quotient.ambient_dim)?;
    let grid = Arc::new(QuotientGrid::new(model.quotient.clone(), file.u.grid.n)?);
    let result = file.into_result(grid)?;
    let options = VerifyOptions::new(vec![leaf; model.leaf_coord_count()], dirs, seed);
    let report = verify_symmetric_criticality(&spec, &model, &result, &options)?;
    run.step("verify", if report.passed { "passed" } else { "failed" });
    let path = run.path(out, "verify.json");
    run.write_json(&path, &report)?;
    run.finish()?;
    print_json(&serde_json::json!({
        "output": path.display().to_string(),
        "model": report.model,
        "max_nonbasic_residual": report.max_nonbasic_residual,
        "refinement_order_estimate": report.refinement_order_estimate,
        "exact_at_floor": report.exact_at_floor,
        "basic_deviation_of_gradient": report.basic_deviation_of_gradient,
        "passed": report.passed,
    }))?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::verification("criticality verification failed"))
    }
}

#[derive(Serialize)]
struct AverageCase {
    model: String,
    functional: f64,
    residual: f64,
}

pub const AVERAGE_TOLERANCE: f64 = 1e-12;

pub fn average_demo(out_dir: &Path, cases: usize, seed: u64, n_t: usize, leaf: usize, out: Option<&Path>) -> CliResult<()> {
    if cases == 0 {
        return Err(Failure::usage("--cases must be at least 1"));
    }
    let config = serde_json::json!({ "cases": cases, "seed": seed, "n_t": n_t, "leaf": leaf });
    let mut run = Run::new("average-demo", out_dir, &config)?;
    let models = [builtin("flat-torus")?, builtin("clifford")?];
    let grids = models
        .iter()
        .map(|m| Ok(Arc::new(FullGrid::new(m.clone(), n_t, &vec![leaf; m.leaf_coord_count()])?)))
        .collect::<CliResult<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(cases);
    let mut worst = 0.0f64;
    for k in 0..cases {
        let grid = &grids[k % grids.len()];
        let q = grid.quotient();
        let random_basic = |rng: &mut ChaCha8Rng| {
            BasicFunction::new(q.clone(), (0..q.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
        };
        let b = random_basic(&mut rng)?;
        let l1 = random_basic(&mut rng)?;
        let l2 = random_basic(&mut rng)?;
        let f = FullGridFunction::new(grid.clone(), (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
        let functional = symmetric_functional(&b, &l1, &l2, &f)?;
        let residual = verify_average_identity(&b, &l1, &l2, &f)?;
        worst = worst.max(residual / (functional.abs() + 1.0));
        rows.push(AverageCase { model: grid.model().name().to_string(), functional, residual });
    }
    let passed = worst <= AVERAGE_TOLERANCE;
    run.step("average identity", if passed { "passed" } else { "failed" });
    let report = serde_json::json!({
        "cases": rows,
        "max_relative_residual": worst,
        "tolerance": AVERAGE_TOLERANCE,
        "passed": passed,
    });
    let path = run.path(out, "average_demo.json");
    run.write_json(&path, &report)?;
    run.finish()?;
    print_json(&serde_json::json!({
        "output": path.display().to_string(),
        "cases": cases,
        "max_relative_residual": worst,
        "passed": passed,
    }))?;
    if passed {
        Ok(())
    } else {
        Err(Failure::verification(format!("average identity residual {worst:e} exceeds {AVERAGE_TOLERANCE:e}")))
    }
}
