//! Built-in cohomogeneity-one models and their quotient geometry.
//!
//! A model is summarized by its one-dimensional quotient (an interval or a
//! circle, parametrized by arc length) together with the leaf-volume density
//! `V(t)`. Models that carry a torus chart additionally know the diagonal
//! metric `dt² + Σ_j g_j(t) dθ_j²` of the full manifold, which is what the
//! full-grid verification needs.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::numerics;

/// Behaviour of the quotient at one end of an interval domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EndpointKind {
    /// Leaves collapse (`V → 0`); `order` is the exponent `l` in `V(t) ~ C t^l`.
    SingularLeaf { order: u32 },
    /// A boundary with positive leaf volume.
    RegularBoundary,
    /// The quotient is a circle and has no endpoints.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Interval {
        length: f64,
        left: EndpointKind,
        right: EndpointKind,
    },
    Circle {
        length: f64,
    },
}

impl Domain {
    pub fn length(&self) -> f64 {
        match *self {
            Domain::Interval { length, .. } | Domain::Circle { length } => length,
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Domain::Circle { .. })
    }

    pub fn endpoint_kind(&self, endpoint: Endpoint) -> EndpointKind {
        match (self, endpoint) {
            (Domain::Circle { .. }, _) => EndpointKind::Periodic,
            (Domain::Interval { left, .. }, Endpoint::Left) => *left,
            (Domain::Interval { right, .. }, Endpoint::Right) => *right,
        }
    }
}

/// Volume of the unit `k`-sphere `S^k ⊂ R^{k+1}`.
pub fn unit_sphere_volume(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * unit_sphere_volume(k - 2),
    }
}

/// Leaf-volume density `V(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    Constant(f64),
    /// `2π² sin 2t` on `[0, π/2]`.
    Clifford,
    /// `ω_{n-1} sin^{n-1} t` on `[0, π]`.
    Latitude { n: usize },
    Sampled(MonotoneCubic),
}

impl Density {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Density::Constant(v) => *v,
            Density::Clifford => 2.0 * PI * PI * (2.0 * t).sin(),
            Density::Latitude { n } => unit_sphere_volume(n - 1) * t.sin().powi(*n as i32 - 1),
            Density::Sampled(c) => c.eval(t),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Density::Constant(_) => 0.0,
            Density::Clifford => 4.0 * PI * PI * (2.0 * t).cos(),
            Density::Latitude { n } => {
                let k = *n as i32 - 1;
                unit_sphere_volume(n - 1) * k as f64 * t.sin().powi(k - 1) * t.cos()
            }
            Density::Sampled(c) => c.derivative(t),
        }
    }
}

/// One coefficient `g_j(t)` of the diagonal leaf metric.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricCoeff {
    Unit,
    CosSquared,
    SinSquared,
    Sampled(MonotoneCubic),
}

impl MetricCoeff {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            MetricCoeff::Unit => 1.0,
            MetricCoeff::CosSquared => t.cos().powi(2),
            MetricCoeff::SinSquared => t.sin().powi(2),
            MetricCoeff::Sampled(c) => c.eval(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuotientModel {
    pub name: String,
    /// Dimension `n` of the manifold.
    pub ambient_dim: usize,
    /// Minimum leaf dimension `d*`.
    pub min_leaf_dim: usize,
    pub domain: Domain,
    pub density: Density,
}

impl QuotientModel {
    pub fn length(&self) -> f64 {
        self.domain.length()
    }

    pub fn density(&self, t: f64) -> f64 {
        self.density.value(t)
    }

    /// Solver use needs `n ≥ 3` and no trivial leaf.
    pub fn is_eligible(&self) -> bool {
        self.min_leaf_dim >= 1 && self.ambient_dim >= 3
    }

    pub fn ensure_eligible(&self) -> Result<()> {
        if self.min_leaf_dim == 0 {
            return Err(Error::Ineligible(format!(
                "model '{}' has a point leaf (d* = 0)",
                self.name
            )));
        }
        if self.ambient_dim < 3 {
            return Err(Error::Ineligible(format!(
                "model '{}' has dimension {} < 3",
                self.name, self.ambient_dim
            )));
        }
        Ok(())
    }

    /// Closed-form total volume for the built-in densities.
    pub fn closed_form_volume(&self) -> Option<f64> {
        match self.density {
            Density::Constant(v) => Some(v * self.length()),
            Density::Clifford => Some(2.0 * PI * PI),
            Density::Latitude { n } => Some(unit_sphere_volume(n)),
            Density::Sampled(_) => None,
        }
    }

    fn check_interior(&self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::NotInterior { t });
        }
        match self.domain {
            Domain::Circle { .. } => Ok(()),
            Domain::Interval { length, .. } => {
                if t > 0.0 && t < length {
                    Ok(())
                } else {
                    Err(Error::NotInterior { t })
                }
            }
        }
    }

    /// Radial mean curvature `h(t) = -V'(t) / V(t)` of the leaf over `t`.
    pub fn mean_curvature(&self, t: f64) -> Result<f64> {
        self.check_interior(t)?;
        let v = self.density.value(t);
        if v <= 0.0 {
            return Err(Error::Numerical(format!("non-positive density {v} at t = {t}")));
        }
        Ok(-self.density.derivative(t) / v)
    }

    /// Estimates `lim V(t) / dist(t, endpoint)^l` at a singular endpoint by
    /// Richardson extrapolation over `dist = 0.1·T·2^{-k}`, `k = 0..8`.
    pub fn leaf_volume_asymptotics(&self, endpoint: Endpoint) -> Result<f64> {
        let order = match self.domain.endpoint_kind(endpoint) {
            EndpointKind::SingularLeaf { order } => order,
            other => {
                return Err(Error::NotApplicable(format!(
                    "endpoint {endpoint:?} of '{}' is {other:?}, not a singular leaf",
                    self.name
                )))
            }
        };
        self.leaf_volume_ratio_limit(endpoint, order)
    }

    /// Same as [`Self::leaf_volume_asymptotics`] with an explicit trial order,
    /// used to validate a declared order.
    pub fn leaf_volume_ratio_limit(&self, endpoint: Endpoint, order: u32) -> Result<f64> {
        let length = self.length();
        let t0 = 0.1 * length;
        let ratios: Vec<f64> = (0..=8)
            .map(|k| {
                let s = t0 / 2f64.powi(k);
                let t = match endpoint {
                    Endpoint::Left => s,
                    Endpoint::Right => length - s,
                };
                self.density.value(t) / s.powi(order as i32)
            })
            .collect();
        let levels = numerics::richardson_levels(&ratios);
        let limit = levels[8];
        let scale = ratios.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        if !limit.is_finite() || limit <= 1e-6 * scale {
            return Err(Error::NotStabilized(format!(
                "V/t^{order} at {endpoint:?} extrapolates to {limit:e}, not a positive limit"
            )));
        }
        let spread = levels[6..]
            .iter()
            .map(|l| (l - limit).abs())
            .fold(0.0f64, f64::max);
        if spread > 1e-4 * limit.abs() {
            return Err(Error::NotStabilized(format!(
                "V/t^{order} at {endpoint:?}: last extrapolation levels {:?} disagree",
                &levels[6..]
            )));
        }
        Ok(limit)
    }

    /// `∫_0^T V(t) dt`.
    pub fn total_volume(&self) -> Result<f64> {
        match &self.density {
            Density::Sampled(c) => {
                let (lo, _) = c.domain();
                Ok(c.integral_to(self.length()) - c.integral_to(lo.max(0.0)))
            }
            d => numerics::integrate(|t| d.value(t), 0.0, self.length(), 1e-14),
        }
    }
}

/// A quotient model together with a torus chart of the full manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct FullModel {
    pub quotient: QuotientModel,
    /// Metric coefficients `g_j(t)`, one per leaf angle; `None` when the
    /// leaves are not tori (e.g. round-sphere latitudes with `n ≥ 3`).
    pub chart: Option<Vec<MetricCoeff>>,
}

impl FullModel {
    pub fn name(&self) -> &str {
        &self.quotient.name
    }

    pub fn leaf_coord_count(&self) -> usize {
        self.chart.as_ref().map_or(0, Vec::len)
    }

    pub fn chart(&self) -> Result<&[MetricCoeff]> {
        self.chart.as_deref().ok_or_else(|| {
            Error::NotApplicable(format!("model '{}' has no torus chart", self.name()))
        })
    }

    /// `(2π)^k Π_j g_j(t)^{1/2}`, the leaf volume implied by the chart.
    pub fn chart_leaf_volume(&self, t: f64) -> Result<f64> {
        let chart = self.chart()?;
        Ok(chart
            .iter()
            .fold((2.0 * PI).powi(chart.len() as i32), |acc, g| acc * g.value(t).sqrt()))
    }

    /// Largest relative deviation between the chart volume and `V` over the
    /// given interior sample points.
    pub fn consistency_deviation(&self, ts: &[f64]) -> Result<f64> {
        let mut worst = 0.0f64;
        for &t in ts {
            let v = self.quotient.density(t);
            let c = self.chart_leaf_volume(t)?;
            worst = worst.max((c - v).abs() / v.abs());
        }
        Ok(worst)
    }
}

/// Flat torus `T^n` with the `T^{n-1}` action rotating the last `n - 1`
/// angles; the quotient is a circle of length `2π`.
pub fn make_flat_torus_model(n: usize, leaf_dim: usize) -> Result<FullModel> {
    if n < 2 {
        return Err(Error::InvalidModel(format!("flat torus needs n ≥ 2, got {n}")));
    }
    if leaf_dim < 1 || leaf_dim > n - 1 {
        return Err(Error::InvalidModel(format!(
            "leaf dimension {leaf_dim} outside 1..={}",
            n - 1
        )));
    }
    if leaf_dim != n - 1 {
        return Err(Error::InvalidModel(format!(
            "quotient of T^{n} by T^{leaf_dim} has dimension {}, only 1 is supported",
            n - leaf_dim
        )));
    }
    Ok(FullModel {
        quotient: QuotientModel {
            name: if n == 3 { "flat-torus".into() } else { format!("flat-torus:{n}") },
            ambient_dim: n,
            min_leaf_dim: leaf_dim,
            domain: Domain::Circle { length: 2.0 * PI },
            density: Density::Constant((2.0 * PI).powi(leaf_dim as i32)),
        },
        chart: Some(vec![MetricCoeff::Unit; leaf_dim]),
    })
}

/// `S³ ⊂ C²` foliated by the orbits of `(z1, z2) ↦ (e^{iα} z1, e^{iβ} z2)`.
pub fn make_sphere_clifford_model() -> FullModel {
    let singular = EndpointKind::SingularLeaf { order: 1 };
    FullModel {
        quotient: QuotientModel {
            name: "clifford".into(),
            ambient_dim: 3,
            min_leaf_dim: 1,
            domain: Domain::Interval { length: PI / 2.0, left: singular, right: singular },
            density: Density::Clifford,
        },
        chart: Some(vec![MetricCoeff::CosSquared, MetricCoeff::SinSquared]),
    }
}

/// `S^n` foliated by latitude spheres (orbits of `SO(n)`); the poles are
/// point leaves, so the model is only used for geometry checks.
pub fn make_sphere_latitude_model(n: usize) -> Result<FullModel> {
    if n < 2 {
        return Err(Error::InvalidModel(format!("latitude model needs n ≥ 2, got {n}")));
    }
    let singular = EndpointKind::SingularLeaf { order: n as u32 - 1 };
    Ok(FullModel {
        quotient: QuotientModel {
            name: if n == 2 { "latitude".into() } else { format!("latitude:{n}") },
            ambient_dim: n,
            min_leaf_dim: 0,
            domain: Domain::Interval { length: PI, left: singular, right: singular },
            density: Density::Latitude { n },
        },
        // only S² has torus (circle) leaves
        chart: (n == 2).then(|| vec![MetricCoeff::SinSquared]),
    })
}

/// Names accepted by [`builtin`], with their default parameters.
pub const BUILTIN_NAMES: [&str; 3] = ["flat-torus", "clifford", "latitude"];

/// Resolves `flat-torus[:n]`, `clifford` or `latitude[:n]`.
pub fn builtin(name: &str) -> Result<FullModel> {
    let (base, param) = match name.split_once(':') {
        Some((b, p)) => {
            let n: usize = p
                .parse()
                .map_err(|_| Error::InvalidModel(format!("bad dimension in '{name}'")))?;
            (b, Some(n))
        }
        None => (name, None),
    };
    match (base, param) {
        ("flat-torus", n) => {
            let n = n.unwrap_or(3);
            make_flat_torus_model(n, n.saturating_sub(1))
        }
        ("clifford", None) => Ok(make_sphere_clifford_model()),
        ("latitude", n) => make_sphere_latitude_model(n.unwrap_or(2)),
        _ => Err(Error::InvalidModel(format!("unknown model '{name}'"))),
    }
}

/// On-disk description of a custom model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub name: String,
    pub n: usize,
    pub d_star: usize,
    pub domain: DomainFile,
    pub density_samples: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_coeff_samples: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainFile {
    /// `"interval"` or `"circle"`.
    pub kind: String,
    #[serde(rename = "T")]
    pub length: f64,
    #[serde(default)]
    pub endpoints: Vec<EndpointKind>,
}

fn cubic_from_pairs(pairs: &[[f64; 2]]) -> Result<MonotoneCubic> {
    let xs = pairs.iter().map(|p| p[0]).collect();
    let ys = pairs.iter().map(|p| p[1]).collect();
    MonotoneCubic::new(xs, ys)
}

/// Tolerance for chart/density agreement of custom (sampled) models.
pub const CUSTOM_CHART_TOLERANCE: f64 = 1e-6;

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<FullModel> {
        let length = self.domain.length;
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidModel(format!("domain length {length} must be positive")));
        }
        let domain = match self.domain.kind.as_str() {
            "circle" => Domain::Circle { length },
            "interval" => {
                let [left, right] = <[EndpointKind; 2]>::try_from(self.domain.endpoints.clone())
                    .map_err(|_| Error::InvalidModel("interval needs two endpoints".into()))?;
                if left == EndpointKind::Periodic || right == EndpointKind::Periodic {
                    return Err(Error::InvalidModel("interval endpoints cannot be periodic".into()));
                }
                Domain::Interval { length, left, right }
            }
            other => return Err(Error::InvalidModel(format!("unknown domain kind '{other}'"))),
        };
        let density = cubic_from_pairs(&self.density_samples)?;
        let (lo, hi) = density.domain();
        if lo > 0.0 || hi < length {
            return Err(Error::InvalidModel(format!(
                "density samples cover [{lo}, {hi}], not [0, {length}]"
            )));
        }
        for [t, v] in &self.density_samples {
            let interior = *t > 0.0 && *t < length;
            if (interior && *v <= 0.0) || *v < 0.0 {
                return Err(Error::InvalidModel(format!("density must be positive inside, got V({t}) = {v}")));
            }
        }
        let chart = match &self.metric_coeff_samples {
            None => None,
            Some(cols) => Some(
                cols.iter()
                    .map(|c| cubic_from_pairs(c).map(MetricCoeff::Sampled))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let model = FullModel {
            quotient: QuotientModel {
                name: self.name.clone(),
                ambient_dim: self.n,
                min_leaf_dim: self.d_star,
                domain,
                density: Density::Sampled(density),
            },
            chart,
        };
        if model.chart.is_some() {
            let ts: Vec<f64> = (1..100).map(|k| length * k as f64 / 100.0).collect();
            let dev = model.consistency_deviation(&ts)?;
            if dev > CUSTOM_CHART_TOLERANCE {
                return Err(Error::InvalidModel(format!(
                    "metric coefficients disagree with the density (relative deviation {dev:e})"
                )));
            }
        }
        Ok(model)
    }
}

/// Leaf-volume limit at a singular endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointCheck {
    pub endpoint: Endpoint,
    pub order: u32,
    pub limit: Option<f64>,
    pub expected: Option<f64>,
    pub error: Option<String>,
}

/// Mean curvature against a finite difference of `-ln V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureCheck {
    pub points: Vec<f64>,
    pub steps: Vec<f64>,
    pub max_errors: Vec<f64>,
    pub orders: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub model: String,
    pub n: usize,
    pub d_star: usize,
    pub eligible: bool,
    pub total_volume: f64,
    pub closed_form_volume: Option<f64>,
    pub midpoint: f64,
    pub mean_curvature_at_midpoint: f64,
    pub curvature: CurvatureCheck,
    pub endpoints: Vec<EndpointCheck>,
    pub passed: bool,
}

/// Minimum observed order for the curvature check.
pub const CURVATURE_MIN_ORDER: f64 = 1.9;

fn curvature_probe(model: &QuotientModel) -> (Vec<f64>, f64) {
    let length = model.length();
    if let Density::Sampled(c) = &model.density {
        let knots: Vec<f64> = c.samples().map(|(x, _)| x).collect();
        let mut cells: Vec<(f64, f64)> = knots
            .windows(2)
            .filter(|w| w[0] > 0.0 && w[1] < length)
            .map(|w| (0.5 * (w[0] + w[1]), w[1] - w[0]))
            .collect();
        if cells.is_empty() {
            cells = knots.windows(2).map(|w| (0.5 * (w[0] + w[1]), w[1] - w[0])).collect();
        }
        let stride = cells.len().div_ceil(7).max(1);
        let chosen: Vec<(f64, f64)> = cells.into_iter().step_by(stride).collect();
        let width = chosen.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        (chosen.into_iter().map(|c| c.0).collect(), (0.01 * length).min(width / 8.0))
    } else {
        ((1..8).map(|k| length * k as f64 / 8.0).collect(), 0.01 * length)
    }
}

/// Mean-curvature and leaf-volume asymptotics checks for one model.
pub fn geometry_report(model: &QuotientModel) -> Result<GeometryReport> {
    let (points, h0) = curvature_probe(model);
    let steps: Vec<f64> = (0..3).map(|k| h0 / 2f64.powi(k)).collect();
    let neg_log_v = |t: f64| -model.density(t).ln();
    let mut max_errors = Vec::new();
    for &h in &steps {
        let mut worst = 0.0f64;
        for &t in &points {
            let fd = (neg_log_v(t + h) - neg_log_v(t - h)) / (2.0 * h);
            worst = worst.max((fd - model.mean_curvature(t)?).abs());
        }
        max_errors.push(worst);
    }
    let orders: Vec<f64> = max_errors
        .windows(2)
        .map(|e| if e[0] <= 1e-13 && e[1] <= 1e-13 { f64::INFINITY } else { (e[0] / e[1]).log2() })
        .collect();

    let mut endpoints = Vec::new();
    if let Domain::Interval { left, right, .. } = model.domain {
        for (endpoint, kind) in [(Endpoint::Left, left), (Endpoint::Right, right)] {
            if let EndpointKind::SingularLeaf { order } = kind {
                let expected = match model.density {
                    Density::Clifford => Some(4.0 * PI * PI),
                    Density::Latitude { n } => Some(unit_sphere_volume(n - 1)),
                    _ => None,
                };
                let (limit, error) = match model.leaf_volume_asymptotics(endpoint) {
                    Ok(l) => (Some(l), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                endpoints.push(EndpointCheck { endpoint, order, limit, expected, error });
            }
        }
    }
    let total_volume = model.total_volume()?;
    let closed_form_volume = model.closed_form_volume();
    let volume_ok = closed_form_volume.is_none_or(|v| (total_volume - v).abs() <= 1e-10 * v);
    let endpoints_ok = endpoints.iter().all(|e| match (e.limit, e.expected) {
        (Some(l), Some(x)) => (l - x).abs() <= 1e-4 * x,
        (Some(_), None) => true,
        (None, _) => false,
    });
    let midpoint = 0.5 * model.length();
    let passed = orders.iter().all(|o| *o >= CURVATURE_MIN_ORDER) && endpoints_ok && volume_ok;
    Ok(GeometryReport {
        model: model.name.clone(),
        n: model.ambient_dim,
        d_star: model.min_leaf_dim,
        eligible: model.is_eligible(),
        total_volume,
        closed_form_volume,
        midpoint,
        mean_curvature_at_midpoint: model.mean_curvature(midpoint)?,
        curvature: CurvatureCheck { points, steps, max_errors, orders },
        endpoints,
        passed,
    })
}
