//! Constrained minimization on the discrete constraint manifold, multiplier
//! recovery and ε-sweeps.
//!
//! The iteration is a projected gradient method in the weighted H¹ inner
//! product `⟨u, v⟩ = Σ w_i (u_i v_i + u'_i v'_i)`: the Riesz representative of
//! `dJ` loses its component along the representative of `dG`, an Armijo step
//! is taken, and the iterate is scaled back onto the constraint using the
//! homogeneity of the constraint integrand.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basic::{BasicFunction, QuotientGrid};
use crate::error::{Error, Result};
use crate::functionals::{
    constraint_raw, derivative_vector, reduced_nonlocal, stationarity_vector, Energy, EnergySpec,
};
use crate::linalg::{sobolev_gram, SkylineCholesky};
use crate::models::QuotientModel;

/// `ε^{1/(r+1)} (r+1)^{1/(r+1)} p*`.
pub fn constraint_target(epsilon: f64, r: f64, p_star: f64) -> Result<f64> {
    if !(epsilon > 0.0 && r > 0.0 && p_star > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "constraint target needs positive inputs (ε = {epsilon}, r = {r}, p* = {p_star})"
        )));
    }
    let e = 1.0 / (r + 1.0);
    Ok(epsilon.powf(e) * (r + 1.0).powf(e) * p_star)
}

/// `λ ε^{r/(r+1)} (r+1)^{r/(r+1)} + θ p*`.
pub fn lambda_star_kirchhoff(epsilon: f64, theta: f64, lambda: f64, r: f64, p_star: f64) -> f64 {
    let e = r / (r + 1.0);
    lambda * epsilon.powf(e) * (r + 1.0).powf(e) + theta * p_star
}

/// `(λ/a)(r+1)(aε)^{r/(r+1)} + θ`.
pub fn lambda_star_general(epsilon: f64, theta: f64, lambda: f64, a: f64, r: f64) -> f64 {
    lambda / a * (r + 1.0) * (a * epsilon).powf(r / (r + 1.0)) + theta
}

/// Scales `u` so that its raw constraint value equals `target`, using the
/// homogeneity `G(s u) = s^degree G(u)`.
pub fn project_to_constraint(
    energy: &impl Energy,
    grid: &QuotientGrid,
    u: &BasicFunction,
    target: f64,
) -> Result<BasicFunction> {
    if !u.grid().same_as(grid) {
        return Err(Error::GridMismatch("function does not live on this grid".into()));
    }
    let values = project_values(energy, grid, u.values(), target)?;
    BasicFunction::new(u.grid().clone(), values)
}

fn project_values(energy: &impl Energy, grid: &QuotientGrid, u: &[f64], target: f64) -> Result<Vec<f64>> {
    let degree = energy.constraint_degree();
    let mut v = u.to_vec();
    for _ in 0..2 {
        let g = constraint_raw(energy, grid, &v);
        if g == 0.0 || !g.is_finite() {
            return Err(Error::Degenerate(format!("constraint value {g} cannot be rescaled")));
        }
        let ratio = target / g;
        if ratio <= 0.0 {
            return Err(Error::Degenerate(format!(
                "constraint value {g} has the wrong sign for target {target}"
            )));
        }
        if ratio == 1.0 {
            break;
        }
        let s = ratio.powf(1.0 / degree);
        v.iter_mut().for_each(|x| *x *= s);
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub initial: f64,
    pub backtrack: f64,
    pub armijo: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self { initial: 1.0, backtrack: 0.5, armijo: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitPolicy {
    Constant,
    /// Band-limited random initial guess: a constant plus cosine and sine
    /// modes of frequency ≤ 4 with seeded coefficients.
    Random { seed: u64 },
    Supplied { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub epsilon: f64,
    #[serde(rename = "N")]
    pub grid: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    #[serde(default)]
    pub step: StepPolicy,
    pub init: InitPolicy,
    /// Experimental: minimize over functions with zero weighted mean.
    #[serde(default)]
    pub deflate: bool,
    /// Use the negative constraint branch (general energies only).
    #[serde(default)]
    pub negative: bool,
}

impl SolveConfig {
    pub fn new(epsilon: f64, grid: usize) -> Self {
        Self {
            epsilon,
            grid,
            max_iters: 5000,
            grad_tol: 1e-10,
            step: StepPolicy::default(),
            init: InitPolicy::Constant,
            deflate: false,
            negative: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("ε = {} must be positive", self.epsilon)));
        }
        if !(self.grad_tol > 0.0) || !(self.step.initial > 0.0) {
            return Err(Error::InvalidArgument("tolerances and steps must be positive".into()));
        }
        if !(self.step.backtrack > 0.0 && self.step.backtrack < 1.0) || !(self.step.armijo > 0.0 && self.step.armijo < 1.0) {
            return Err(Error::InvalidArgument("backtracking factor and Armijo constant must lie in (0, 1)".into()));
        }
        if self.grid < 3 {
            return Err(Error::InvalidArgument(format!("grid needs at least 3 nodes, got {}", self.grid)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: BasicFunction,
    pub theta: f64,
    pub lambda_star: f64,
    /// `|G(u) − target| / |target|`.
    pub constraint_residual: f64,
    /// H¹ norm of the tangential gradient.
    pub tangent_grad_norm: f64,
    /// `max_i |dJ_{λ*}(u)[e_i]|` on the reduced grid.
    pub stationarity_residual: f64,
    /// Filled in by the criticality verification.
    pub full_stationarity_residual: Option<f64>,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub energy_trace: Vec<f64>,
    pub target: f64,
    pub config: SolveConfig,
}

/// Multiplier estimate and the quality of the Lagrange condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaReport {
    pub theta: f64,
    /// `‖∇J − θ∇G‖` in the H¹ norm.
    pub alignment_residual: f64,
}

fn constraint_covector(energy: &impl Energy, grid: &QuotientGrid, u: &[f64]) -> Vec<f64> {
    grid.weights()
        .iter()
        .zip(grid.nodes().iter().zip(u))
        .map(|(w, (t, s))| if *w == 0.0 { 0.0 } else { w * energy.constraint_slope(*s, *t) })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Tangent {
    direction: Vec<f64>,
    norm: f64,
    theta: f64,
}

/// Removes the components along the constraint covectors from the Riesz
/// gradient, measuring everything in the Gram metric.
fn tangent_gradient(gram: &SkylineCholesky, d: &[f64], covectors: &[Vec<f64>]) -> Result<Tangent> {
    let rj = gram.solve(d);
    let reps: Vec<Vec<f64>> = covectors.iter().map(|c| gram.solve(c)).collect();
    let k = covectors.len();
    let mut a = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = dot(&covectors[i], &reps[j]);
        }
        rhs[i] = dot(&covectors[i], &rj);
    }
    let coeffs = solve_small(a, rhs)?;
    let mut direction = rj;
    for (c, r) in coeffs.iter().zip(&reps) {
        direction.iter_mut().zip(r).for_each(|(x, y)| *x -= c * y);
    }
    let mut residual = d.to_vec();
    for (c, cv) in coeffs.iter().zip(covectors) {
        residual.iter_mut().zip(cv).for_each(|(x, y)| *x -= c * y);
    }
    let norm = dot(&direction, &residual).max(0.0).sqrt();
    Ok(Tangent { direction, norm, theta: coeffs[0] })
}

fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if !(a[piv][col].abs() > 0.0) || !a[piv][col].is_finite() {
            return Err(Error::Degenerate("constraint gradient vanishes".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Ok(x)
}

/// `θ` from the H¹ least-squares fit `∇J ≈ θ ∇G` and its residual.
pub fn extract_theta(energy: &impl Energy, grid: &QuotientGrid, u: &BasicFunction) -> Result<ThetaReport> {
    if !u.grid().same_as(grid) {
        return Err(Error::GridMismatch("function does not live on this grid".into()));
    }
    let gram = sobolev_gram(grid)?;
    let d = derivative_vector(energy, grid, u.values());
    let dg = constraint_covector(energy, grid, u.values());
    let t = tangent_gradient(&gram, &d, &[dg])?;
    Ok(ThetaReport { theta: t.theta, alignment_residual: t.norm })
}

/// Recovered `λ*` for the level actually used (`±` branch).
fn lambda_star_for(energy: &EnergySpec, epsilon: f64, theta: f64, target: f64) -> f64 {
    match energy {
        EnergySpec::General(g) if target < 0.0 => {
            g.lambda / g.a * (g.r + 1.0) * target.powf(g.r) + theta
        }
        _ => energy.lambda_star(epsilon, theta),
    }
}

fn initial_values(config: &SolveConfig, grid: &QuotientGrid) -> Result<Vec<f64>> {
    let n = grid.len();
    let len = grid.model().length();
    let mut values = match &config.init {
        InitPolicy::Constant => vec![1.0; n],
        InitPolicy::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let base = 1.0;
            let modes: Vec<(f64, f64)> =
                (1..=4).map(|_| (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3))).collect();
            let period = if grid.is_periodic() { len } else { 2.0 * len };
            grid.nodes()
                .iter()
                .map(|&t| {
                    let x = 2.0 * PI * t / period;
                    base + modes
                        .iter()
                        .enumerate()
                        .map(|(k, (a, b))| {
                            let kf = (k + 1) as f64;
                            if grid.is_periodic() {
                                a * (kf * x).cos() + b * (kf * x).sin()
                            } else {
                                (a + b) * (kf * x).cos()
                            }
                        })
                        .sum::<f64>()
                })
                .collect()
        }
        InitPolicy::Supplied { values } => {
            if values.len() != n {
                return Err(Error::GridMismatch(format!(
                    "supplied initial guess has {} values, grid has {n}",
                    values.len()
                )));
            }
            values.clone()
        }
    };
    if config.deflate {
        let w = grid.weights();
        let mean = dot(w, &values) / w.iter().sum::<f64>();
        values.iter_mut().for_each(|v| *v -= mean);
        if values.iter().all(|v| v.abs() < 1e-300) {
            return Err(Error::Degenerate("deflated initial guess is zero; use a non-constant init".into()));
        }
    }
    if config.negative {
        values.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(values)
}

/// Projected-gradient minimization of `energy` on `{G = target(ε)}`.
pub fn minimize_on_constraint(energy: &EnergySpec, model: &QuotientModel, config: &SolveConfig) -> Result<SolveResult> {
    config.validate()?;
    model.ensure_eligible()?;
    if energy.p() >= model.ambient_dim as f64 {
        return Err(Error::NotApplicable(format!("p = {} is not below n = {}", energy.p(), model.ambient_dim)));
    }
    let grid = Arc::new(QuotientGrid::new(model.clone(), config.grid)?);
    let target = energy.constraint_target(config.epsilon, config.negative)?;
    let gram = sobolev_gram(&grid)?;
    let mean_covector = grid.weights().to_vec();

    let mut u = project_values(energy, &grid, &initial_values(config, &grid)?, target)?;
    let eval = |u: &[f64]| {
        let (nl, _) = reduced_nonlocal(energy, &grid, u);
        energy.energy_from(&nl)
    };
    let tangent_at = |u: &[f64]| {
        let d = derivative_vector(energy, &grid, u);
        let mut covectors = vec![constraint_covector(energy, &grid, u)];
        if config.deflate {
            covectors.push(mean_covector.clone());
        }
        tangent_gradient(&gram, &d, &covectors)
    };
    let mut j = eval(&u);
    let mut trace = vec![j];
    let mut tangent = tangent_at(&u)?;
    let mut step = config.step.initial;
    let mut iterations = 0;
    let mut converged = false;
    loop {
        if !j.is_finite() {
            return Err(Error::Numerical(format!("energy became {j} at iteration {iterations}")));
        }
        if tangent.norm <= config.grad_tol {
            converged = true;
            break;
        }
        if iterations >= config.max_iters {
            break;
        }
        let decrease = tangent.norm * tangent.norm;
        let noise = 64.0 * f64::EPSILON * j.abs().max(f64::MIN_POSITIVE);
        let mut accepted = None;
        let mut s = step;
        while s > 1e-16 * config.step.initial {
            let trial: Vec<f64> = u.iter().zip(&tangent.direction).map(|(a, b)| a - s * b).collect();
            if let Ok(projected) = project_values(energy, &grid, &trial, target) {
                let jt = eval(&projected);
                if jt.is_finite() {
                    if s * decrease >= noise {
                        if jt <= j - config.step.armijo * s * decrease {
                            accepted = Some((projected, jt, None));
                            break;
                        }
                    } else if jt <= j + noise {
                        // below the energy noise floor the step is judged by
                        // the tangential gradient instead
                        let tn = tangent_at(&projected)?;
                        if tn.norm < tangent.norm {
                            accepted = Some((projected, jt, Some(tn)));
                            break;
                        }
                    }
                }
            }
            s *= config.step.backtrack;
        }
        let Some((next, jn, tn)) = accepted else { break };
        u = next;
        j = jn;
        trace.push(j);
        iterations += 1;
        step = (s / config.step.backtrack).min(config.step.initial * 1e6);
        tangent = match tn {
            Some(t) => t,
            None => tangent_at(&u)?,
        };
    }
    let theta = tangent.theta;
    let lambda_star = lambda_star_for(energy, config.epsilon, theta, target);
    let stationarity = stationarity_vector(energy, &grid, &u, lambda_star);
    let g = constraint_raw(energy, &grid, &u);
    Ok(SolveResult {
        u: BasicFunction::new(grid.clone(), u)?,
        theta,
        lambda_star,
        constraint_residual: (g - target).abs() / target.abs(),
        tangent_grad_norm: tangent.norm,
        stationarity_residual: stationarity.iter().fold(0.0, |m, x| m.max(x.abs())),
        full_stationarity_residual: None,
        energy: j,
        iterations,
        converged,
        energy_trace: trace,
        target,
        config: config.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct SequenceMember {
    pub epsilon: f64,
    pub result: std::result::Result<SolveResult, String>,
}

#[derive(Debug, Clone)]
pub struct SolutionSequence {
    pub members: Vec<SequenceMember>,
    /// Smallest `|∫|u_i|^{p*} − ∫|u_j|^{p*}|` over converged pairs.
    pub min_mass_gap: f64,
    /// Smallest `‖u_i − u_j‖_{L^{p*}}` over converged pairs.
    pub min_distance: f64,
    pub workers: usize,
}

impl SolutionSequence {
    pub fn all_converged(&self) -> bool {
        self.members.iter().all(|m| matches!(&m.result, Ok(r) if r.converged))
    }
}

/// Independent solves at strictly increasing `ε`, run in parallel.
pub fn solve_sequence(
    energy: &EnergySpec,
    model: &QuotientModel,
    config: &SolveConfig,
    epsilons: &[f64],
) -> Result<SolutionSequence> {
    if epsilons.is_empty() {
        return Err(Error::InvalidArgument("empty ε list".into()));
    }
    if epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidArgument("every ε must be positive".into()));
    }
    if epsilons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("ε values must be strictly increasing".into()));
    }
    let members: Vec<SequenceMember> = epsilons
        .par_iter()
        .map(|&epsilon| {
            let cfg = SolveConfig { epsilon, ..config.clone() };
            SequenceMember {
                epsilon,
                result: minimize_on_constraint(energy, model, &cfg).map_err(|e| e.to_string()),
            }
        })
        .collect();
    let p_star = energy.p_star();
    let solved: Vec<&SolveResult> = members.iter().filter_map(|m| m.result.as_ref().ok()).collect();
    let mut min_mass_gap = f64::INFINITY;
    let mut min_distance = f64::INFINITY;
    for (i, a) in solved.iter().enumerate() {
        let grid = a.u.grid();
        let mass_a: f64 = dot(grid.weights(), &a.u.values().iter().map(|x| x.abs().powf(p_star)).collect::<Vec<_>>());
        for b in &solved[i + 1..] {
            let mass_b: f64 = dot(grid.weights(), &b.u.values().iter().map(|x| x.abs().powf(p_star)).collect::<Vec<_>>());
            min_mass_gap = min_mass_gap.min((mass_a - mass_b).abs());
            let dist: f64 = grid
                .weights()
                .iter()
                .zip(a.u.values().iter().zip(b.u.values()))
                .map(|(w, (x, y))| w * (x - y).abs().powf(p_star))
                .sum::<f64>()
                .powf(1.0 / p_star);
            min_distance = min_distance.min(dist);
        }
    }
    Ok(SolutionSequence { members, min_mass_gap, min_distance, workers: rayon::current_num_threads() })
}
