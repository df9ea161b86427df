//! Product grids over torus charts, the group average and leaf shifts.
//!
//! A [`FullGrid`] is the quotient grid times a uniform periodic grid in each
//! leaf angle. Its quadrature weight depends on the quotient node only, so
//! cyclic shifts along a leaf axis are exact symmetries of every discrete
//! integral, and the average over leaf indices is an exact projection.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::basic::{BasicFunction, QuotientGrid};
use crate::error::{Error, Result};
use crate::models::FullModel;
use crate::numerics::CompensatedSum;

#[derive(Debug, Clone)]
pub struct FullGrid {
    model: FullModel,
    quotient: Arc<QuotientGrid>,
    leaf_sizes: Vec<usize>,
    row_weights: Vec<f64>,
    metric_inverse: Vec<Vec<f64>>,
}

impl FullGrid {
    /// `n_t` quotient nodes and `leaf_sizes[j]` nodes on leaf angle `j`.
    pub fn new(model: FullModel, n_t: usize, leaf_sizes: &[usize]) -> Result<Self> {
        let quotient = Arc::new(QuotientGrid::new(model.quotient.clone(), n_t)?);
        Self::on_quotient(model, quotient, leaf_sizes)
    }

    /// Builds the product grid over an existing quotient grid.
    pub fn on_quotient(model: FullModel, quotient: Arc<QuotientGrid>, leaf_sizes: &[usize]) -> Result<Self> {
        if quotient.model() != &model.quotient {
            return Err(Error::GridMismatch("quotient grid belongs to another model".into()));
        }
        let chart = model.chart()?.to_vec();
        if leaf_sizes.len() != chart.len() {
            return Err(Error::InvalidArgument(format!(
                "model '{}' has {} leaf angles, got {} leaf sizes",
                model.name(),
                chart.len(),
                leaf_sizes.len()
            )));
        }
        if leaf_sizes.iter().any(|&n| n < 2) {
            return Err(Error::InvalidArgument("each leaf axis needs at least 2 nodes".into()));
        }
        let h_t = quotient.spacing();
        let n_t = quotient.len();
        let leaf_cell: f64 = leaf_sizes.iter().map(|&n| 2.0 * PI / n as f64).product();
        let mut row_weights = Vec::with_capacity(n_t);
        let mut metric_inverse = vec![Vec::with_capacity(n_t); chart.len()];
        for (i, &t) in quotient.nodes().iter().enumerate() {
            let trap = if quotient.weights()[i] == 0.0 {
                0.0
            } else if !quotient.is_periodic() && (i == 0 || i + 1 == n_t) {
                0.5
            } else {
                1.0
            };
            let mut w = trap * h_t * leaf_cell;
            for (j, g) in chart.iter().enumerate() {
                let gv = g.value(t);
                w *= gv.max(0.0).sqrt();
                metric_inverse[j].push(if gv > 0.0 { 1.0 / gv } else { f64::INFINITY });
            }
            row_weights.push(w);
        }
        Ok(Self { model, quotient, leaf_sizes: leaf_sizes.to_vec(), row_weights, metric_inverse })
    }

    pub fn model(&self) -> &FullModel {
        &self.model
    }

    pub fn quotient(&self) -> &Arc<QuotientGrid> {
        &self.quotient
    }

    pub fn n_t(&self) -> usize {
        self.quotient.len()
    }

    pub fn leaf_sizes(&self) -> &[usize] {
        &self.leaf_sizes
    }

    /// Number of nodes on one leaf.
    pub fn leaf_count(&self) -> usize {
        self.leaf_sizes.iter().product()
    }

    pub fn len(&self) -> usize {
        self.n_t() * self.leaf_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight shared by all nodes of quotient row `i`.
    pub fn row_weights(&self) -> &[f64] {
        &self.row_weights
    }

    /// `1 / g_j(t_i)`; infinite where the angle collapses.
    pub fn metric_inverse(&self, axis: usize) -> &[f64] {
        &self.metric_inverse[axis]
    }

    pub fn leaf_spacing(&self, axis: usize) -> f64 {
        2.0 * PI / self.leaf_sizes[axis] as f64
    }

    /// Distance between consecutive indices of `axis` in a leaf row.
    pub fn leaf_stride(&self, axis: usize) -> usize {
        self.leaf_sizes[axis + 1..].iter().product()
    }

    /// Leaf angles of flat leaf index `a` (last axis fastest).
    pub fn leaf_angles(&self, mut a: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.leaf_sizes.len()];
        for j in (0..self.leaf_sizes.len()).rev() {
            let n = self.leaf_sizes[j];
            out[j] = (a % n) as f64 * self.leaf_spacing(j);
            a /= n;
        }
        out
    }

    /// `Σ W` over all nodes.
    pub fn total_weight(&self) -> f64 {
        let m = self.leaf_count() as f64;
        self.row_weights.iter().map(|w| w * m).sum()
    }

    pub fn same_as(&self, other: &FullGrid) -> bool {
        std::ptr::eq(self, other)
            || (self.quotient.same_as(&other.quotient) && self.leaf_sizes == other.leaf_sizes)
    }

    pub fn describe(&self) -> FullGridRef {
        FullGridRef {
            model_name: self.model.name().to_string(),
            n_t: self.n_t(),
            leaf: self.leaf_sizes.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullGridRef {
    pub model_name: String,
    #[serde(rename = "N_t")]
    pub n_t: usize,
    pub leaf: Vec<usize>,
}

/// Values on a [`FullGrid`], row-major: quotient index outermost, leaf
/// multi-index lexicographic with the last axis fastest.
#[derive(Debug, Clone)]
pub struct FullGridFunction {
    grid: Arc<FullGrid>,
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullGridFunctionJson {
    pub grid: FullGridRef,
    pub values: Vec<f64>,
}

const BINARY_MAGIC: &[u8; 4] = b"FGF1";

impl FullGridFunction {
    pub fn new(grid: Arc<FullGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a full grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("full-grid values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(t, angles)`.
    pub fn from_fn(grid: Arc<FullGrid>, f: impl Fn(f64, &[f64]) -> f64) -> Result<Self> {
        let m = grid.leaf_count();
        let angles: Vec<Vec<f64>> = (0..m).map(|a| grid.leaf_angles(a)).collect();
        let mut values = Vec::with_capacity(grid.len());
        for &t in grid.quotient().nodes() {
            for ang in &angles {
                values.push(f(t, ang));
            }
        }
        Self::new(grid, values)
    }

    pub fn zeros(grid: Arc<FullGrid>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn grid(&self) -> &Arc<FullGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.grid.leaf_count();
        &self.values[i * m..(i + 1) * m]
    }

    /// `Σ W_i f_{i,a}`.
    pub fn integrate(&self) -> f64 {
        let mut s = CompensatedSum::default();
        for (i, w) in self.grid.row_weights().iter().enumerate() {
            let row: CompensatedSum = self.row(i).iter().copied().collect();
            s.add(w * row.value());
        }
        s.value()
    }

    pub fn to_json(&self) -> FullGridFunctionJson {
        FullGridFunctionJson { grid: self.grid.describe(), values: self.values.clone() }
    }

    pub fn from_json(json: FullGridFunctionJson, grid: Arc<FullGrid>) -> Result<Self> {
        if json.grid != grid.describe() {
            return Err(Error::GridMismatch(format!(
                "stored shape {:?} does not match grid {:?}",
                json.grid,
                grid.describe()
            )));
        }
        Self::new(grid, json.values)
    }

    /// Binary form: `FGF1`, name length (u32) and UTF-8 name, rank (u32),
    /// dimensions `N_t, N_1, …` (u64 each), then the values as f64, all
    /// little-endian.
    pub fn write_binary(&self, mut out: impl Write) -> Result<()> {
        let name = self.grid.model().name().as_bytes();
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name)?;
        out.write_all(&(1 + self.grid.leaf_sizes().len() as u32).to_le_bytes())?;
        out.write_all(&(self.grid.n_t() as u64).to_le_bytes())?;
        for &n in self.grid.leaf_sizes() {
            out.write_all(&(n as u64).to_le_bytes())?;
        }
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut input: impl Read, grid: Arc<FullGrid>) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::InvalidArgument("not a full-grid binary file".into()));
        }
        let mut u32buf = [0u8; 4];
        let mut u64buf = [0u8; 8];
        input.read_exact(&mut u32buf)?;
        let mut name = vec![0u8; u32::from_le_bytes(u32buf) as usize];
        input.read_exact(&mut name)?;
        input.read_exact(&mut u32buf)?;
        let rank = u32::from_le_bytes(u32buf) as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            input.read_exact(&mut u64buf)?;
            dims.push(u64::from_le_bytes(u64buf) as usize);
        }
        let stored = FullGridRef {
            model_name: String::from_utf8_lossy(&name).into_owned(),
            n_t: dims.first().copied().unwrap_or(0),
            leaf: dims.get(1..).map(<[usize]>::to_vec).unwrap_or_default(),
        };
        if stored != grid.describe() {
            return Err(Error::GridMismatch(format!("stored shape {stored:?} does not match the grid")));
        }
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            input.read_exact(&mut u64buf)?;
            values.push(f64::from_le_bytes(u64buf));
        }
        Self::new(grid, values)
    }
}

/// Constant extension of `u` along the leaves.
pub fn lift(u: &BasicFunction, grid: &Arc<FullGrid>) -> Result<FullGridFunction> {
    if !u.grid().same_as(grid.quotient()) {
        return Err(Error::GridMismatch("basic function and full grid use different quotient grids".into()));
    }
    let m = grid.leaf_count();
    let mut values = Vec::with_capacity(grid.len());
    for &v in u.values() {
        values.extend(std::iter::repeat(v).take(m));
    }
    Ok(FullGridFunction { grid: grid.clone(), values })
}

/// Mean over the leaf indices of every quotient row.
pub fn average(f: &FullGridFunction) -> BasicFunction {
    let m = f.grid.leaf_count() as f64;
    let values = (0..f.grid.n_t())
        .map(|i| {
            let row = f.row(i);
            let x0 = row[0];
            x0 + row.iter().map(|x| x - x0).collect::<CompensatedSum>().value() / m
        })
        .collect();
    BasicFunction::new(f.grid.quotient().clone(), values).expect("average of finite values is finite")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasicCheck {
    pub is_basic: bool,
    /// `max_i (max_a f_{i,a} − min_a f_{i,a})`.
    pub deviation: f64,
}

pub fn is_basic(f: &FullGridFunction, tol: f64) -> BasicCheck {
    let deviation = (0..f.grid.n_t())
        .map(|i| {
            let row = f.row(i);
            let (lo, hi) = row.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            hi - lo
        })
        .fold(0.0, f64::max);
    BasicCheck { is_basic: deviation <= tol, deviation }
}

/// Cyclic shift of `f` by `cells` along leaf axis `axis`:
/// `shift(f)(…, θ_j, …) = f(…, θ_j − cells·h_j, …)`.
pub fn shift(f: &FullGridFunction, axis: usize, cells: i64) -> Result<FullGridFunction> {
    let grid = &f.grid;
    if axis >= grid.leaf_sizes().len() {
        return Err(Error::InvalidArgument(format!("leaf axis {axis} out of range")));
    }
    let n = grid.leaf_sizes()[axis];
    let c = cells.rem_euclid(n as i64) as usize;
    let stride = grid.leaf_stride(axis);
    let block = n * stride;
    let m = grid.leaf_count();
    let mut values = vec![0.0; f.values.len()];
    for i in 0..grid.n_t() {
        let src = f.row(i);
        let dst = &mut values[i * m..(i + 1) * m];
        for outer in (0..m).step_by(block) {
            for k in 0..n {
                let to = outer + ((k + c) % n) * stride;
                let from = outer + k * stride;
                dst[to..to + stride].copy_from_slice(&src[from..from + stride]);
            }
        }
    }
    Ok(FullGridFunction { grid: grid.clone(), values })
}

/// Derivative along quotient rows using the quotient stencil.
pub(crate) fn t_derivative(f: &FullGridFunction) -> Vec<f64> {
    let grid = &f.grid;
    let m = grid.leaf_count();
    let mut out = vec![0.0; f.values.len()];
    for i in 0..grid.n_t() {
        let stencil = grid.quotient().derivative_row(i);
        let dst = &mut out[i * m..(i + 1) * m];
        for (k, c) in stencil {
            for (d, s) in dst.iter_mut().zip(f.row(k)) {
                *d += c * s;
            }
        }
    }
    out
}

/// Periodic central difference along leaf axis `axis`.
pub(crate) fn leaf_derivative(f: &FullGridFunction, axis: usize) -> Vec<f64> {
    let grid = &f.grid;
    let n = grid.leaf_sizes()[axis];
    let stride = grid.leaf_stride(axis);
    let block = n * stride;
    let inv = 1.0 / (2.0 * grid.leaf_spacing(axis));
    let m = grid.leaf_count();
    let mut out = vec![0.0; f.values.len()];
    for i in 0..grid.n_t() {
        let src = f.row(i);
        let dst = &mut out[i * m..(i + 1) * m];
        for outer in (0..m).step_by(block) {
            for k in 0..n {
                let next = outer + ((k + 1) % n) * stride;
                let prev = outer + ((k + n - 1) % n) * stride;
                let here = outer + k * stride;
                for s in 0..stride {
                    dst[here + s] = (src[next + s] - src[prev + s]) * inv;
                }
            }
        }
    }
    out
}

fn check_basic_inputs(grid: &FullGrid, fs: &[&BasicFunction]) -> Result<()> {
    if fs.iter().all(|f| f.grid().same_as(grid.quotient())) {
        Ok(())
    } else {
        Err(Error::GridMismatch("basic inputs must live on the full grid's quotient grid".into()))
    }
}

/// `l(w) = ∫ L1 g(∇b, ∇w) + L2 w` on the full grid; since `b` is basic only
/// `∂_t w` pairs with `b'`.
pub fn symmetric_functional(
    b: &BasicFunction,
    l1: &BasicFunction,
    l2: &BasicFunction,
    w: &FullGridFunction,
) -> Result<f64> {
    let grid = w.grid();
    check_basic_inputs(grid, &[b, l1, l2])?;
    let db = grid.quotient().derivative_of(b.values());
    let dw = t_derivative(w);
    let m = grid.leaf_count();
    let mut total = CompensatedSum::default();
    for (i, &wt) in grid.row_weights().iter().enumerate() {
        if wt == 0.0 {
            continue;
        }
        let (a1, a2) = (l1.values()[i] * db[i], l2.values()[i]);
        let row: CompensatedSum = (0..m).map(|a| a1 * dw[i * m + a] + a2 * w.values[i * m + a]).collect();
        total.add(wt * row.value());
    }
    Ok(total.value())
}

/// `|l(lift(Av F)) − l(F)|`.
pub fn verify_average_identity(
    b: &BasicFunction,
    l1: &BasicFunction,
    l2: &BasicFunction,
    f: &FullGridFunction,
) -> Result<f64> {
    let averaged = lift(&average(f), f.grid())?;
    Ok((symmetric_functional(b, l1, l2, &averaged)? - symmetric_functional(b, l1, l2, f)?).abs())
}
