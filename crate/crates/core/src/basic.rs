//! Leaf-constant ("basic") functions discretized on the quotient.
//!
//! For a basic function `b`, `∫_M b dυ = ∫_0^T b(t) V(t) dt` and
//! `|∇b| = |b'(t)|` because the quotient coordinate is arc length, so every
//! integral over the manifold becomes a `V`-weighted quadrature on a uniform
//! quotient grid.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{EndpointKind, QuotientModel};

#[derive(Debug, Clone, PartialEq)]
pub struct QuotientGrid {
    model: QuotientModel,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    spacing: f64,
}

impl QuotientGrid {
    /// Uniform grid with `n` nodes. Interval grids include both endpoints and
    /// use trapezoid weights; circle grids wrap periodically. Weights at
    /// singular endpoints are exactly zero.
    pub fn new(model: QuotientModel, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("grid needs at least 3 nodes, got {n}")));
        }
        let length = model.length();
        let periodic = model.domain.is_periodic();
        let spacing = if periodic { length / n as f64 } else { length / (n - 1) as f64 };
        let nodes: Vec<f64> = (0..n).map(|i| i as f64 * spacing).collect();
        let mut weights: Vec<f64> = nodes.iter().map(|&t| model.density(t) * spacing).collect();
        if !periodic {
            weights[0] *= 0.5;
            weights[n - 1] *= 0.5;
            use crate::models::Endpoint;
            if matches!(model.domain.endpoint_kind(Endpoint::Left), EndpointKind::SingularLeaf { .. }) {
                weights[0] = 0.0;
            }
            if matches!(model.domain.endpoint_kind(Endpoint::Right), EndpointKind::SingularLeaf { .. }) {
                weights[n - 1] = 0.0;
            }
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidModel(format!(
                "density of '{}' produced a negative or non-finite weight",
                model.name
            )));
        }
        Ok(Self { model, nodes, weights, spacing })
    }

    pub fn model(&self) -> &QuotientModel {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn is_periodic(&self) -> bool {
        self.model.domain.is_periodic()
    }

    /// `Σ w_i`, the discrete volume of the manifold.
    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn same_as(&self, other: &QuotientGrid) -> bool {
        std::ptr::eq(self, other)
            || (self.len() == other.len()
                && self.model.name == other.model.name
                && self.spacing == other.spacing)
    }

    /// Second-order derivative stencil: central in the interior, one-sided at
    /// interval endpoints, periodic on circles.
    pub fn derivative_of(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let inv = 1.0 / (2.0 * self.spacing);
        let mut out = vec![0.0; n];
        for i in 1..n - 1 {
            out[i] = (u[i + 1] - u[i - 1]) * inv;
        }
        if self.is_periodic() {
            out[0] = (u[1] - u[n - 1]) * inv;
            out[n - 1] = (u[0] - u[n - 2]) * inv;
        } else {
            out[0] = (4.0 * (u[1] - u[0]) - (u[2] - u[0])) * inv;
            out[n - 1] = (4.0 * (u[n - 1] - u[n - 2]) - (u[n - 1] - u[n - 3])) * inv;
        }
        out
    }

    /// Nonzero entries `(column, coefficient)` of row `k` of the derivative
    /// matrix used by [`Self::derivative_of`].
    pub fn derivative_row(&self, k: usize) -> Vec<(usize, f64)> {
        let n = self.len();
        let inv = 1.0 / (2.0 * self.spacing);
        if k > 0 && k + 1 < n {
            return vec![(k - 1, -inv), (k + 1, inv)];
        }
        match (self.is_periodic(), k == 0) {
            (true, true) => vec![(n - 1, -inv), (1, inv)],
            (true, false) => vec![(n - 2, -inv), (0, inv)],
            (false, true) => vec![(0, -3.0 * inv), (1, 4.0 * inv), (2, -inv)],
            (false, false) => vec![(n - 3, inv), (n - 2, -4.0 * inv), (n - 1, 3.0 * inv)],
        }
    }

    /// Transpose of [`Self::derivative_of`]: `Σ_k D_{k i} y_k`.
    pub fn derivative_transpose(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        let inv = 1.0 / (2.0 * self.spacing);
        let mut out = vec![0.0; n];
        for k in 1..n - 1 {
            out[k + 1] += y[k] * inv;
            out[k - 1] -= y[k] * inv;
        }
        if self.is_periodic() {
            out[1] += y[0] * inv;
            out[n - 1] -= y[0] * inv;
            out[0] += y[n - 1] * inv;
            out[n - 2] -= y[n - 1] * inv;
        } else {
            out[0] -= 3.0 * y[0] * inv;
            out[1] += 4.0 * y[0] * inv;
            out[2] -= y[0] * inv;
            out[n - 1] += 3.0 * y[n - 1] * inv;
            out[n - 2] -= 4.0 * y[n - 1] * inv;
            out[n - 3] += y[n - 1] * inv;
        }
        out
    }

    fn check(&self, u: &BasicFunction) -> Result<()> {
        if u.grid.same_as(self) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "function lives on '{}' with {} nodes, grid is '{}' with {} nodes",
                u.grid.model.name,
                u.grid.len(),
                self.model.name,
                self.len()
            )))
        }
    }

    /// `Σ w_i u_i`.
    pub fn integrate(&self, u: &BasicFunction) -> Result<f64> {
        self.check(u)?;
        Ok(self.weights.iter().zip(&u.values).map(|(w, v)| w * v).sum())
    }

    pub fn derivative(&self, u: &BasicFunction) -> Result<BasicFunction> {
        self.check(u)?;
        Ok(BasicFunction { grid: u.grid.clone(), values: self.derivative_of(&u.values) })
    }

    /// `(Σ w_i |u_i|^q)^{1/q}`.
    pub fn lp_norm(&self, u: &BasicFunction, q: f64) -> Result<f64> {
        self.check(u)?;
        if !(q >= 1.0) {
            return Err(Error::InvalidArgument(format!("Lebesgue exponent {q} < 1")));
        }
        let s: f64 = self.weights.iter().zip(&u.values).map(|(w, v)| w * v.abs().powf(q)).sum();
        Ok(s.powf(1.0 / q))
    }

    /// `Σ w_i |u'_i|^p` (no `1/p` factor).
    pub fn sobolev_energy(&self, u: &BasicFunction, p: f64) -> Result<f64> {
        self.check(u)?;
        if !(p >= 1.0) {
            return Err(Error::InvalidArgument(format!("Sobolev exponent {p} < 1")));
        }
        let du = self.derivative_of(&u.values);
        Ok(self.weights.iter().zip(&du).map(|(w, d)| w * d.abs().powf(p)).sum())
    }
}

/// A leaf-constant function sampled at the quotient grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicFunction {
    grid: Arc<QuotientGrid>,
    values: Vec<f64>,
}

impl BasicFunction {
    pub fn new(grid: Arc<QuotientGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid with {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("basic function has non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<QuotientGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&t| f(t)).collect();
        Self { grid, values }
    }

    pub fn constant(grid: Arc<QuotientGrid>, c: f64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<QuotientGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn to_json(&self) -> BasicFunctionJson {
        BasicFunctionJson {
            grid: GridRef { model_name: self.grid.model().name.clone(), n: self.grid.len() },
            values: self.values.clone(),
        }
    }

    /// `t,u` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,u\n");
        for (t, u) in self.grid.nodes().iter().zip(&self.values) {
            out.push_str(&format!("{t:.16e},{u:.16e}\n"));
        }
        out
    }

    /// Cubic Hermite interpolation with node slopes from the grid stencil.
    pub fn interpolate(&self, t: f64) -> f64 {
        let slopes = self.grid.derivative_of(&self.values);
        self.hermite_at(&slopes, t)
    }

    fn hermite_at(&self, slopes: &[f64], t: f64) -> f64 {
        let grid = &self.grid;
        let n = grid.len();
        let h = grid.spacing();
        let (k, s) = if grid.is_periodic() {
            let x = t.rem_euclid(grid.model().length()) / h;
            let k = (x.floor() as usize).min(n - 1);
            (k, x - k as f64)
        } else {
            let x = (t / h).clamp(0.0, (n - 1) as f64);
            let k = (x.floor() as usize).min(n - 2);
            (k, x - k as f64)
        };
        let k1 = (k + 1) % n;
        hermite(self.values[k], self.values[k1], slopes[k] * h, slopes[k1] * h, s)
    }

    /// Resamples onto another grid of the same model by [`Self::interpolate`].
    pub fn resample(&self, target: Arc<QuotientGrid>) -> Result<BasicFunction> {
        if target.model().name != self.grid.model().name {
            return Err(Error::GridMismatch("cannot resample across models".into()));
        }
        let slopes = self.grid.derivative_of(&self.values);
        let values = target.nodes().iter().map(|&t| self.hermite_at(&slopes, t)).collect();
        BasicFunction::new(target, values)
    }
}

fn hermite(y0: f64, y1: f64, m0: f64, m1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRef {
    pub model_name: String,
    #[serde(rename = "N")]
    pub n: usize,
}

/// JSON form `{grid:{model_name,N}, values:[...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasicFunctionJson {
    pub grid: GridRef,
    pub values: Vec<f64>,
}

impl BasicFunctionJson {
    pub fn into_function(self, grid: Arc<QuotientGrid>) -> Result<BasicFunction> {
        if grid.model().name != self.grid.model_name || grid.len() != self.grid.n {
            return Err(Error::GridMismatch(format!(
                "stored function is on '{}' with N = {}",
                self.grid.model_name, self.grid.n
            )));
        }
        BasicFunction::new(grid, self.values)
    }
}

/// Critical Sobolev exponent `p* = n p / (n - p)`.
pub fn critical_exponent(n: usize, p: f64) -> Result<f64> {
    let nf = n as f64;
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} < 1")));
    }
    if p >= nf {
        return Err(Error::NotApplicable(format!("p = {p} ≥ n = {n}: no critical exponent")));
    }
    Ok(nf * p / (nf - p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingRegime {
    /// Compact into `L^q` for `q < p_0` with some `p_0 > p*`.
    SubcriticalImproved,
    /// Compact into every `L^q`, `q ≥ 1`.
    AllExponents,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub n: usize,
    pub p: f64,
    pub d_star: usize,
    pub p_star: Option<f64>,
    pub regime: EmbeddingRegime,
    pub note: String,
}

/// Range of Lebesgue exponents into which the basic Sobolev space
/// `W^{1,p}(M)^F` embeds compactly.
pub fn embedding_range(n: usize, p: f64, d_star: usize) -> Result<ExponentReport> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("n = {n} < 3")));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} < 1")));
    }
    if d_star == 0 {
        return Err(Error::Ineligible("foliation has a point leaf (d* = 0)".into()));
    }
    let p_star = critical_exponent(n, p).ok();
    if p >= (n - d_star) as f64 {
        Ok(ExponentReport {
            n,
            p,
            d_star,
            p_star,
            regime: EmbeddingRegime::AllExponents,
            note: format!("p ≥ n - d* = {}: compact into L^q for every q ≥ 1", n - d_star),
        })
    } else {
        let ps = p_star.expect("p < n - d* < n");
        Ok(ExponentReport {
            n,
            p,
            d_star,
            p_star,
            regime: EmbeddingRegime::SubcriticalImproved,
            note: format!(
                "compact into L^q for 1 ≤ q < p_0 with some p_0 > p* = {ps}; p_0 is not determined"
            ),
        })
    }
}
