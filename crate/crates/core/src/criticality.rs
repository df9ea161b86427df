//! Numerical symmetric criticality: a basic critical point, lifted to the
//! full product grid, is tested against non-basic directions.
//!
//! Two kinds of evidence are produced. Directions with zero leaf average must
//! give residuals at round-off level on every grid, because every coefficient
//! of the first variation at a lifted point is leaf-independent. Mixed
//! directions are evaluated on a common reference grid finer than the solve
//! grids, so their residuals measure how far each discrete solution is from a
//! critical point of the continuous problem; those residuals must shrink under
//! refinement.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{leaf_derivative, lift, shift, t_derivative, FullGrid, FullGridFunction};
use crate::basic::{BasicFunction, QuotientGrid};
use crate::error::{Error, Result};
use crate::functionals::{Decomposition, DirectionalDerivative, Energy, EnergySpec, Nonlocal};
use crate::models::FullModel;
use crate::numerics::CompensatedSum;
use crate::solver::{minimize_on_constraint, InitPolicy, SolveConfig, SolveResult};

struct FullState {
    nonlocal: Nonlocal,
    dt: Vec<f64>,
    dleaf: Vec<Vec<f64>>,
    grad_sq: Vec<f64>,
}

fn full_state(energy: &impl Energy, u: &FullGridFunction) -> FullState {
    let grid = u.grid();
    let m = grid.leaf_count();
    let dt = t_derivative(u);
    let dleaf: Vec<Vec<f64>> = (0..grid.leaf_sizes().len()).map(|j| leaf_derivative(u, j)).collect();
    let mut grad_sq = vec![0.0; u.values().len()];
    let mut nonlocal = Nonlocal::default();
    let nodes = grid.quotient().nodes();
    for (i, &w) in grid.row_weights().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let mut row = Nonlocal::default();
        for a in 0..m {
            let k = i * m + a;
            let mut s = dt[k] * dt[k];
            for (j, d) in dleaf.iter().enumerate() {
                s += grid.metric_inverse(j)[i] * d[k] * d[k];
            }
            grad_sq[k] = s;
            row += energy.integrands(s, u.values()[k], nodes[i]);
        }
        nonlocal += row.scaled(w);
    }
    FullState { nonlocal, dt, dleaf, grad_sq }
}

fn check_same(u: &FullGridFunction, w: &FullGridFunction) -> Result<()> {
    if u.grid().same_as(w.grid()) {
        Ok(())
    } else {
        Err(Error::GridMismatch("functions live on different full grids".into()))
    }
}

/// Energy of a full-grid function.
pub fn full_energy(energy: &impl Energy, u: &FullGridFunction) -> f64 {
    energy.energy_from(&full_state(energy, u).nonlocal)
}

/// `dJ(U)[W]` on the full grid with `|∇U|² = (∂_t U)² + Σ_j g_j⁻¹ (∂_{θ_j} U)²`.
pub fn full_denergy(energy: &impl Energy, u: &FullGridFunction, w: &FullGridFunction) -> Result<DirectionalDerivative> {
    check_same(u, w)?;
    let grid = u.grid();
    let m = grid.leaf_count();
    let st = full_state(energy, u);
    let dwt = t_derivative(w);
    let dwl: Vec<Vec<f64>> = (0..grid.leaf_sizes().len()).map(|j| leaf_derivative(w, j)).collect();
    let nodes = grid.quotient().nodes();
    let mut sums = [CompensatedSum::default(); 4];
    for (i, &wt) in grid.row_weights().iter().enumerate() {
        if wt == 0.0 {
            continue;
        }
        let mut row = [CompensatedSum::default(); 4];
        for a in 0..m {
            let k = i * m + a;
            let c = energy.coefficients(&st.nonlocal, st.grad_sq[k], u.values()[k], nodes[i]);
            let mut g = st.dt[k] * dwt[k];
            for (j, (du, dw)) in st.dleaf.iter().zip(&dwl).enumerate() {
                g += grid.metric_inverse(j)[i] * du[k] * dw[k];
            }
            row[0].add(c.kirchhoff * g);
            row[1].add(c.lagrangian_grad * g);
            row[2].add(c.lagrangian_zero * w.values()[k]);
            row[3].add(c.potential * w.values()[k]);
        }
        for (s, r) in sums.iter_mut().zip(row) {
            s.add(wt * r.value());
        }
    }
    let d = Decomposition {
        kirchhoff_term: sums[0].value(),
        lagrangian_grad_term: sums[1].value(),
        lagrangian_zero_term: sums[2].value(),
        potential_term: sums[3].value(),
    };
    Ok(DirectionalDerivative { value: d.total(), decomposition: d })
}

/// `g_{i,a} = dJ(U)[e_{i,a}]`, divided by the node weight where it is positive
/// (the weighted-L² representative).
pub fn full_gradient(energy: &impl Energy, u: &FullGridFunction) -> Vec<f64> {
    let grid = u.grid();
    let m = grid.leaf_count();
    let st = full_state(energy, u);
    let nodes = grid.quotient().nodes();
    let n_axes = grid.leaf_sizes().len();
    let mut flux_t = vec![0.0; u.values().len()];
    let mut flux_l = vec![vec![0.0; u.values().len()]; n_axes];
    let mut out = vec![0.0; u.values().len()];
    for (i, &wt) in grid.row_weights().iter().enumerate() {
        if wt == 0.0 {
            continue;
        }
        for a in 0..m {
            let k = i * m + a;
            let c = energy.coefficients(&st.nonlocal, st.grad_sq[k], u.values()[k], nodes[i]);
            let coef = wt * c.gradient_part();
            flux_t[k] = coef * st.dt[k];
            for j in 0..n_axes {
                flux_l[j][k] = coef * grid.metric_inverse(j)[i] * st.dleaf[j][k];
            }
            out[k] = wt * c.value_part();
        }
    }
    for k in 0..grid.n_t() {
        for (i, c) in grid.quotient().derivative_row(k) {
            for a in 0..m {
                out[i * m + a] += c * flux_t[k * m + a];
            }
        }
    }
    for (j, flux) in flux_l.into_iter().enumerate() {
        // the periodic central difference is antisymmetric
        let f = FullGridFunction::new(grid.clone(), flux).expect("finite flux");
        for (o, d) in out.iter_mut().zip(leaf_derivative(&f, j)) {
            *o -= d;
        }
    }
    for (i, &wt) in grid.row_weights().iter().enumerate() {
        if wt > 0.0 {
            out[i * m..(i + 1) * m].iter_mut().for_each(|g| *g /= wt);
        }
    }
    out
}

/// Non-basic part of the full gradient at `lift(b)`:
/// `max_i (max_a g − min_a g) / (1 + max |g|)`.
pub fn gradient_is_basic_check(energy: &impl Energy, grid: &Arc<FullGrid>, b: &BasicFunction) -> Result<f64> {
    let u = lift(b, grid)?;
    let g = full_gradient(energy, &u);
    let m = grid.leaf_count();
    let scale = 1.0 + g.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let spread = g
        .chunks(m)
        .map(|row| {
            let (lo, hi) = row.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            hi - lo
        })
        .fold(0.0, f64::max);
    Ok(spread / scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowInvariance {
    pub base_value: f64,
    pub max_deviation: f64,
}

/// `max |dJ(lift b)[shift W] − dJ(lift b)[W]|` over `(axis, cells)` shifts.
pub fn flow_invariance_check(
    energy: &impl Energy,
    grid: &Arc<FullGrid>,
    b: &BasicFunction,
    w: &FullGridFunction,
    shifts: &[(usize, i64)],
) -> Result<FlowInvariance> {
    let u = lift(b, grid)?;
    let base = full_denergy(energy, &u, w)?.value;
    let mut worst = 0.0f64;
    for &(axis, cells) in shifts {
        let moved = shift(w, axis, cells)?;
        worst = worst.max((full_denergy(energy, &u, &moved)?.value - base).abs());
    }
    Ok(FlowInvariance { base_value: base, max_deviation: worst })
}

// ---------------------------------------------------------------------------
// test directions

/// Smooth function of the quotient coordinate: a Fourier series on circles,
/// a cosine series (even at both ends) on intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl Envelope {
    fn value(&self, t: f64, length: f64, periodic: bool) -> f64 {
        let x = if periodic { 2.0 * PI * t / length } else { PI * t / length };
        let c: f64 = self.cos.iter().enumerate().map(|(k, a)| a * (k as f64 * x).cos()).sum();
        let s: f64 = if periodic {
            self.sin.iter().enumerate().map(|(k, b)| b * ((k + 1) as f64 * x).sin()).sum()
        } else {
            0.0
        };
        c + s
    }

    fn random(rng: &mut ChaCha8Rng, terms: usize) -> Self {
        Self {
            cos: (0..terms).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            sin: (0..terms).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }
}

/// `envelope(t) · Π_j g_j(t)^{|m_j|/2} · Π_j trig(m_j θ_j)`; the metric factor
/// keeps the mode smooth where an angle collapses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafMode {
    pub frequencies: Vec<usize>,
    /// `true` for cosine, `false` for sine, per axis.
    pub cosine: Vec<bool>,
    pub envelope: Envelope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionKind {
    /// Zero leaf average.
    PureLeaf,
    /// Basic part plus leaf modes.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub kind: DirectionKind,
    pub basic: Option<Envelope>,
    pub modes: Vec<LeafMode>,
}

impl Direction {
    /// Random band-limited direction (leaf frequencies ≤ `N_j / 4`).
    pub fn random(rng: &mut ChaCha8Rng, leaf_sizes: &[usize], kind: DirectionKind) -> Self {
        let n_modes = rng.gen_range(1..=3);
        let modes = (0..n_modes)
            .map(|_| {
                let mut frequencies: Vec<usize> =
                    leaf_sizes.iter().map(|&n| rng.gen_range(0..=(n / 4).max(1))).collect();
                if frequencies.iter().all(|&f| f == 0) {
                    let j = rng.gen_range(0..leaf_sizes.len());
                    frequencies[j] = 1;
                }
                let cosine = leaf_sizes.iter().map(|_| rng.gen_bool(0.5)).collect();
                LeafMode { frequencies, cosine, envelope: Envelope::random(rng, 3) }
            })
            .collect();
        let basic = match kind {
            DirectionKind::PureLeaf => None,
            DirectionKind::Mixed => Some(Envelope::random(rng, 4)),
        };
        Self { kind, basic, modes }
    }

    /// Samples the direction on `grid`.
    pub fn sample(&self, grid: &Arc<FullGrid>) -> Result<FullGridFunction> {
        let s = SampledDirection::new(self, grid);
        let m = grid.leaf_count();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n_t() {
            values.extend((0..m).map(|a| s.value(i, a)));
        }
        FullGridFunction::new(grid.clone(), values)
    }
}

struct SampledDirection {
    basic: Vec<f64>,
    basic_dt: Vec<f64>,
    env: Vec<Vec<f64>>,
    env_dt: Vec<Vec<f64>>,
    leaf: Vec<Vec<f64>>,
    /// Discrete leaf derivatives of each mode, per axis.
    leaf_d: Vec<Vec<Vec<f64>>>,
}

impl SampledDirection {
    fn new(dir: &Direction, grid: &FullGrid) -> Self {
        let q = grid.quotient();
        let model = grid.model();
        let chart = model.chart().expect("full grids carry a chart");
        let (len, periodic) = (q.model().length(), q.is_periodic());
        let basic: Vec<f64> = match &dir.basic {
            Some(e) => q.nodes().iter().map(|&t| e.value(t, len, periodic)).collect(),
            None => vec![0.0; q.len()],
        };
        let basic_dt = q.derivative_of(&basic);
        let m = grid.leaf_count();
        let angles: Vec<Vec<f64>> = (0..m).map(|a| grid.leaf_angles(a)).collect();
        let mut env = Vec::new();
        let mut env_dt = Vec::new();
        let mut leaf = Vec::new();
        let mut leaf_d = Vec::new();
        for mode in &dir.modes {
            let e: Vec<f64> = q
                .nodes()
                .iter()
                .map(|&t| {
                    let metric: f64 = chart
                        .iter()
                        .zip(&mode.frequencies)
                        .map(|(g, &f)| g.value(t).max(0.0).sqrt().powi(f as i32))
                        .product();
                    metric * mode.envelope.value(t, len, periodic)
                })
                .collect();
            env_dt.push(q.derivative_of(&e));
            env.push(e);
            let trig = |j: usize, theta: f64, deriv: bool| {
                let f = mode.frequencies[j] as f64;
                let h = grid.leaf_spacing(j);
                let (c, s) = ((f * theta).cos(), (f * theta).sin());
                match (mode.cosine[j] || f == 0.0, deriv) {
                    (true, false) => c,
                    (false, false) => s,
                    (true, true) => -(f * h).sin() / h * s,
                    (false, true) => (f * h).sin() / h * c,
                }
            };
            let n_axes = grid.leaf_sizes().len();
            leaf.push(angles.iter().map(|th| (0..n_axes).map(|j| trig(j, th[j], false)).product()).collect());
            leaf_d.push(
                (0..n_axes)
                    .map(|d| {
                        angles
                            .iter()
                            .map(|th| (0..n_axes).map(|j| trig(j, th[j], j == d)).product())
                            .collect()
                    })
                    .collect(),
            );
        }
        Self { basic, basic_dt, env, env_dt, leaf, leaf_d }
    }

    fn value(&self, i: usize, a: usize) -> f64 {
        self.basic[i] + self.env.iter().zip(&self.leaf).map(|(e, l)| e[i] * l[a]).sum::<f64>()
    }

    fn dt(&self, i: usize, a: usize) -> f64 {
        self.basic_dt[i] + self.env_dt.iter().zip(&self.leaf).map(|(e, l)| e[i] * l[a]).sum::<f64>()
    }

    fn dleaf(&self, i: usize, a: usize, axis: usize) -> f64 {
        self.env.iter().zip(&self.leaf_d).map(|(e, l)| e[i] * l[axis][a]).sum()
    }
}

/// Row coefficients of `dJ_{λ*}` (or `dJ` when `lambda_star` is `None`) at a
/// lifted basic point: `P_i = A_i u'_i` multiplies `∂_t W`, `B_i` multiplies `W`.
fn lifted_coefficients(
    energy: &impl Energy,
    grid: &FullGrid,
    u: &[f64],
    lambda_star: Option<f64>,
    lambda_scale: f64,
) -> LiftedCoefficients {
    let q = grid.quotient();
    let du = q.derivative_of(u);
    let m = grid.leaf_count() as f64;
    let mut nonlocal = Nonlocal::default();
    for (i, &w) in grid.row_weights().iter().enumerate() {
        if w > 0.0 {
            nonlocal += energy.integrands(du[i] * du[i], u[i], q.nodes()[i]).scaled(w * m);
        }
    }
    let mut out = LiftedCoefficients { p: vec![0.0; u.len()], b: vec![0.0; u.len()], b_abs: vec![0.0; u.len()] };
    for i in 0..u.len() {
        let t = q.nodes()[i];
        let c = energy.coefficients(&nonlocal, du[i] * du[i], u[i], t);
        out.p[i] = c.gradient_part() * du[i];
        let f = energy.reaction(u[i], t);
        out.b[i] = match lambda_star {
            Some(ls) => c.lagrangian_zero - ls * f,
            None => c.value_part(),
        };
        out.b_abs[i] = match lambda_star {
            Some(_) => c.lagrangian_zero.abs() + lambda_scale * f.abs(),
            None => c.lagrangian_zero.abs() + c.potential.abs(),
        };
    }
    out
}

/// `P_i` multiplies `∂_t W`, `B_i` multiplies `W`; `b_abs` bounds the size of
/// the terms that cancel inside `B_i`.
struct LiftedCoefficients {
    p: Vec<f64>,
    b: Vec<f64>,
    b_abs: Vec<f64>,
}

/// `|dJ(lift u)[W]|`, the sum of absolute integrand terms and `‖W‖_{H¹}`,
/// streamed over the full grid.
struct StreamedResidual {
    value: f64,
    abs_terms: f64,
    norm: f64,
}

fn streamed_residual(grid: &FullGrid, c: &LiftedCoefficients, dir: &SampledDirection) -> StreamedResidual {
    let (p, b) = (&c.p, &c.b);
    let m = grid.leaf_count();
    let n_axes = grid.leaf_sizes().len();
    let rows: Vec<(f64, f64, f64)> = (0..grid.n_t())
        .into_par_iter()
        .map(|i| {
            let w = grid.row_weights()[i];
            if w == 0.0 {
                return (0.0, 0.0, 0.0);
            }
            let mut value = CompensatedSum::default();
            let mut abs = 0.0;
            let mut norm = 0.0;
            for a in 0..m {
                let wv = dir.value(i, a);
                let wt = dir.dt(i, a);
                let (g, z) = (p[i] * wt, b[i] * wv);
                value.add(g + z);
                abs += g.abs() + c.b_abs[i] * wv.abs();
                let mut n2 = wv * wv + wt * wt;
                for j in 0..n_axes {
                    let d = dir.dleaf(i, a, j);
                    n2 += grid.metric_inverse(j)[i] * d * d;
                }
                norm += n2;
            }
            (w * value.value(), w * abs, w * norm)
        })
        .collect();
    let value: CompensatedSum = rows.iter().map(|r| r.0).collect();
    StreamedResidual {
        value: value.value().abs(),
        abs_terms: rows.iter().map(|r| r.1).sum(),
        norm: rows.iter().map(|r| r.2).sum::<f64>().sqrt(),
    }
}

/// `|A| + |λ* − A|` where `A` is the `θ`-free part of `λ*`: the size of the
/// two contributions that cancel at a constant minimizer.
fn multiplier_scale(energy: &EnergySpec, sol: &SolveResult) -> f64 {
    let a = energy.lambda_star(sol.config.epsilon, 0.0);
    a.abs() + (sol.lambda_star - a).abs()
}

// ---------------------------------------------------------------------------
// verification driver

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub leaf_sizes: Vec<usize>,
    pub num_dirs: usize,
    pub seed: u64,
    /// Reference grid spacing is the refined spacing divided by this factor.
    pub reference_factor: usize,
    /// Pure-leaf residuals must not exceed this multiple of the scale.
    pub pure_tolerance: f64,
    pub min_order: f64,
}

impl VerifyOptions {
    pub fn new(leaf_sizes: Vec<usize>, num_dirs: usize, seed: u64) -> Self {
        Self { leaf_sizes, num_dirs, seed, reference_factor: 4, pure_tolerance: 1e-10, min_order: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    #[serde(rename = "N_t")]
    pub n_t: usize,
    pub leaf: Vec<usize>,
    pub lambda_star: f64,
    pub solve_converged: bool,
    /// Largest pure-leaf residual divided by its scale.
    pub max_pure_ratio: f64,
    /// Largest `|dJ_{λ*}(lift u)[W]| / ‖W‖` over mixed directions on this
    /// level's own full grid.
    pub max_mixed_residual: f64,
    /// Root mean square of the mixed residuals on the reference grid.
    pub reference_rms: f64,
    pub reference_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionResidual {
    pub kind: DirectionKind,
    /// `|dJ_{λ*}(lift u)[W]| / ‖W‖` on each level's own full grid.
    pub residuals: Vec<f64>,
    /// The matching `Σ|terms| / ‖W‖`.
    pub scales: Vec<f64>,
    /// Residuals of each level's solution on the reference grid (mixed only).
    pub reference_residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalityReport {
    pub model: String,
    pub levels: Vec<LevelReport>,
    #[serde(rename = "reference_N_t")]
    pub reference_n_t: usize,
    /// Largest pure-leaf residual over all levels.
    pub max_nonbasic_residual: f64,
    pub residual_per_direction: Vec<DirectionResidual>,
    /// `None` when all mixed residuals sit below the noise floor.
    pub refinement_order_estimate: Option<f64>,
    pub exact_at_floor: bool,
    pub basic_deviation_of_gradient: f64,
    pub pure_pass: bool,
    pub refinement_pass: bool,
    pub passed: bool,
}

fn refined_size(grid: &QuotientGrid, factor: usize) -> usize {
    if grid.is_periodic() {
        grid.len() * factor
    } else {
        (grid.len() - 1) * factor + 1
    }
}

/// Runs the two-level symmetric-criticality verification on a converged solve.
pub fn verify_symmetric_criticality(
    energy: &EnergySpec,
    model: &FullModel,
    result: &SolveResult,
    options: &VerifyOptions,
) -> Result<CriticalityReport> {
    if !result.converged {
        return Err(Error::InvalidArgument("verification needs a converged solve".into()));
    }
    if options.num_dirs < 2 {
        return Err(Error::InvalidArgument("need at least two directions (one pure, one mixed)".into()));
    }
    let coarse_q = result.u.grid().clone();
    if coarse_q.model() != &model.quotient {
        return Err(Error::GridMismatch("solution was computed on another model".into()));
    }
    let coarse = Arc::new(FullGrid::on_quotient(model.clone(), coarse_q.clone(), &options.leaf_sizes)?);

    let fine_n = refined_size(&coarse_q, 2);
    let fine_model_grid = Arc::new(QuotientGrid::new(model.quotient.clone(), fine_n)?);
    let warm = result.u.resample(fine_model_grid)?;
    let fine_cfg = SolveConfig {
        grid: fine_n,
        init: InitPolicy::Supplied { values: warm.into_values() },
        ..result.config.clone()
    };
    let fine_result = minimize_on_constraint(energy, &model.quotient, &fine_cfg)?;
    let fine = Arc::new(FullGrid::on_quotient(model.clone(), fine_result.u.grid().clone(), &options.leaf_sizes)?);

    let ref_n = refined_size(fine.quotient(), options.reference_factor);
    let reference = Arc::new(FullGrid::new(model.clone(), ref_n, &options.leaf_sizes)?);

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let n_pure = options.num_dirs / 2;
    let directions: Vec<Direction> = (0..options.num_dirs)
        .map(|k| {
            let kind = if k < n_pure { DirectionKind::PureLeaf } else { DirectionKind::Mixed };
            Direction::random(&mut rng, &options.leaf_sizes, kind)
        })
        .collect();

    let solutions = [result, &fine_result];
    let grids = [&coarse, &fine];
    let mut per_dir: Vec<DirectionResidual> = directions
        .iter()
        .map(|d| DirectionResidual { kind: d.kind, residuals: vec![], scales: vec![], reference_residuals: vec![] })
        .collect();
    let mut levels = Vec::new();
    let ref_samples: Vec<SampledDirection> = directions.iter().map(|d| SampledDirection::new(d, &reference)).collect();
    for (sol, grid) in solutions.iter().zip(grids) {
        let lambda_scale = multiplier_scale(energy, sol);
        let coeffs = lifted_coefficients(energy, grid, sol.u.values(), Some(sol.lambda_star), lambda_scale);
        let mut max_pure_ratio = 0.0f64;
        let mut max_mixed = 0.0f64;
        for (dir, rep) in directions.iter().zip(per_dir.iter_mut()) {
            let s = streamed_residual(grid, &coeffs, &SampledDirection::new(dir, grid));
            let (res, scale) = (s.value / s.norm, s.abs_terms / s.norm);
            rep.residuals.push(res);
            rep.scales.push(scale);
            match dir.kind {
                DirectionKind::PureLeaf => max_pure_ratio = max_pure_ratio.max(res / scale.max(f64::MIN_POSITIVE)),
                DirectionKind::Mixed => max_mixed = max_mixed.max(res),
            }
        }
        let u_ref = sol.u.resample(reference.quotient().clone())?;
        let ref_coeffs = lifted_coefficients(energy, &reference, u_ref.values(), Some(sol.lambda_star), lambda_scale);
        let mut sq = 0.0;
        let mut scale_sum = 0.0;
        let mut count = 0;
        for ((dir, rep), samp) in directions.iter().zip(per_dir.iter_mut()).zip(&ref_samples) {
            if dir.kind != DirectionKind::Mixed {
                continue;
            }
            let s = streamed_residual(&reference, &ref_coeffs, samp);
            let res = s.value / s.norm;
            rep.reference_residuals.push(res);
            sq += res * res;
            scale_sum += s.abs_terms / s.norm;
            count += 1;
        }
        levels.push(LevelReport {
            n_t: grid.n_t(),
            leaf: options.leaf_sizes.clone(),
            lambda_star: sol.lambda_star,
            solve_converged: sol.converged,
            max_pure_ratio,
            max_mixed_residual: max_mixed,
            reference_rms: (sq / count as f64).sqrt(),
            reference_scale: scale_sum / count as f64,
        });
    }

    let max_nonbasic_residual = per_dir
        .iter()
        .filter(|d| d.kind == DirectionKind::PureLeaf)
        .flat_map(|d| d.residuals.iter().copied())
        .fold(0.0, f64::max);
    let pure_pass = levels.iter().all(|l| l.max_pure_ratio <= options.pure_tolerance);
    let floor = options.pure_tolerance * levels.iter().map(|l| l.reference_scale).fold(0.0, f64::max);
    let (e0, e1) = (levels[0].reference_rms, levels[1].reference_rms);
    let exact_at_floor = e0 <= floor && e1 <= floor;
    let h_ratio = coarse.quotient().spacing() / fine.quotient().spacing();
    let refinement_order_estimate = if exact_at_floor { None } else { Some((e0 / e1.max(floor)).ln() / h_ratio.ln()) };
    let refinement_pass = fine_result.converged
        && (exact_at_floor || refinement_order_estimate.is_some_and(|o| o >= options.min_order));
    let basic_deviation_of_gradient = gradient_is_basic_check(energy, &coarse, &result.u)?;
    Ok(CriticalityReport {
        model: model.name().to_string(),
        levels,
        reference_n_t: ref_n,
        max_nonbasic_residual,
        residual_per_direction: per_dir,
        refinement_order_estimate,
        exact_at_floor,
        basic_deviation_of_gradient,
        pure_pass,
        refinement_pass,
        passed: pure_pass && refinement_pass,
    })
}
