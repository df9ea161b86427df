//! Nonlocal energies and their exact first variations.
//!
//! Two families are supported:
//!
//! * the p-Kirchhoff energy
//!   `J(u) = M(1/p ∫|∇u|^p) − λ/(r+1) (1/p* ∫|u|^{p*})^{r+1}`, and
//! * the general energy
//!   `J(u) = M(∫|∇u|^p) ∫L(|∇u|², u, x) − (λ/a) (∫F(u, x))^{r+1}`.
//!
//! Both are evaluated through the same pointwise interface ([`Energy`]): a
//! pass over the quadrature nodes accumulates the nonlocal integrals, after
//! which the first variation is `∫ A g(∇u,∇v) + B v` with node coefficients
//! `A`, `B` that depend on the point only through `(|∇u|², u, t)`. That form is
//! what makes the same code usable on the reduced quotient grid and on the full
//! product grid.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::basic::{critical_exponent, BasicFunction, QuotientGrid};
use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;

// ---------------------------------------------------------------------------
// weights

/// The weight `m` of a Kirchhoff-type energy and its primitive `M(t) = ∫_0^t m`.
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    /// `m(s) = s^exponent`.
    Power { exponent: f64 },
    /// `m(s) = c0 + c1 s`.
    Affine { c0: f64, c1: f64 },
    /// `m` sampled and interpolated; `M` is its exact antiderivative,
    /// continued linearly past the last sample.
    Table { m: MonotoneCubic },
    /// `M ≡ value` (so `m ≡ 0`); only meaningful for the general energy.
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightJson {
    Power { exponent: f64 },
    Affine { c0: f64, c1: f64 },
    Table { samples: Vec<[f64; 2]> },
    Constant { value: f64 },
}

impl Weight {
    pub fn from_json(w: &WeightJson) -> Result<Self> {
        let weight = match w {
            WeightJson::Power { exponent } => {
                if !(*exponent >= 0.0) {
                    return Err(Error::InvalidSpec(format!("power weight exponent {exponent} < 0")));
                }
                Weight::Power { exponent: *exponent }
            }
            WeightJson::Affine { c0, c1 } => {
                if !(*c0 >= 0.0 && *c1 >= 0.0) {
                    return Err(Error::InvalidSpec("affine weight needs c0, c1 ≥ 0".into()));
                }
                Weight::Affine { c0: *c0, c1: *c1 }
            }
            WeightJson::Table { samples } => {
                if samples.first().map(|s| s[0]) != Some(0.0) {
                    return Err(Error::InvalidSpec("weight table must start at s = 0".into()));
                }
                if samples.iter().any(|s| s[1] < 0.0) {
                    return Err(Error::InvalidSpec("weight table has negative values".into()));
                }
                let xs = samples.iter().map(|s| s[0]).collect();
                let ys = samples.iter().map(|s| s[1]).collect();
                Weight::Table { m: MonotoneCubic::new(xs, ys)? }
            }
            WeightJson::Constant { value } => {
                if !(*value >= 0.0) {
                    return Err(Error::InvalidSpec(format!("constant weight {value} < 0")));
                }
                Weight::Constant { value: *value }
            }
        };
        weight.validate()?;
        Ok(weight)
    }

    pub fn to_json(&self) -> WeightJson {
        match self {
            Weight::Power { exponent } => WeightJson::Power { exponent: *exponent },
            Weight::Affine { c0, c1 } => WeightJson::Affine { c0: *c0, c1: *c1 },
            Weight::Table { m } => WeightJson::Table { samples: m.samples().map(|(x, y)| [x, y]).collect() },
            Weight::Constant { value } => WeightJson::Constant { value: *value },
        }
    }

    /// `m(s)` for `s ≥ 0`.
    pub fn m(&self, s: f64) -> f64 {
        match self {
            Weight::Power { exponent } => {
                if *exponent == 0.0 {
                    1.0
                } else {
                    s.max(0.0).powf(*exponent)
                }
            }
            Weight::Affine { c0, c1 } => c0 + c1 * s,
            Weight::Table { m } => {
                let (_, hi) = m.domain();
                m.eval(s.min(hi))
            }
            Weight::Constant { .. } => 0.0,
        }
    }

    /// `M(t)` for `t ≥ 0`.
    pub fn primitive(&self, t: f64) -> f64 {
        match self {
            Weight::Power { exponent } => t.max(0.0).powf(exponent + 1.0) / (exponent + 1.0),
            Weight::Affine { c0, c1 } => c0 * t + 0.5 * c1 * t * t,
            Weight::Table { m } => {
                let (_, hi) = m.domain();
                if t <= hi {
                    m.integral_to(t)
                } else {
                    m.total_integral() + m.eval(hi) * (t - hi)
                }
            }
            Weight::Constant { value } => *value,
        }
    }

    pub fn vanishes_at_zero(&self) -> bool {
        !matches!(self, Weight::Constant { value } if *value != 0.0)
    }

    /// Sampled checks: `|M' − m| ≤ 1e-8` and second differences of `M`
    /// bounded below by `-1e-9` (convexity).
    pub fn validate(&self) -> Result<()> {
        let hi = match self {
            Weight::Table { m } => m.domain().1 * 1.5,
            _ => 10.0,
        };
        let h = 1e-6 * hi.max(1.0);
        for k in 1..=100 {
            let s = hi * k as f64 / 101.0;
            let fd = (self.primitive(s + h) - self.primitive(s - h)) / (2.0 * h);
            let m = self.m(s);
            if (fd - m).abs() > 1e-8 * (1.0 + m.abs()) * hi.max(1.0) {
                return Err(Error::InvalidSpec(format!("weight primitive inconsistent at s = {s}: M' = {fd}, m = {m}")));
            }
        }
        let step = hi / 200.0;
        for k in 1..200 {
            let s = k as f64 * step;
            let second = self.primitive(s + step) - 2.0 * self.primitive(s) + self.primitive(s - step);
            if second < -1e-9 * (1.0 + self.primitive(s).abs()) {
                return Err(Error::InvalidSpec(format!("weight primitive is not convex near s = {s}")));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// pointwise interface

/// Nonlocal integrals `(∫|∇u|^p, ∫L, ∫F)`; for the Kirchhoff energy the third
/// slot holds `∫|u|^{p*}` and the second is unused.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Nonlocal {
    pub gradient: f64,
    pub lagrangian: f64,
    pub potential: f64,
}

impl std::ops::AddAssign for Nonlocal {
    fn add_assign(&mut self, o: Self) {
        self.gradient += o.gradient;
        self.lagrangian += o.lagrangian;
        self.potential += o.potential;
    }
}

impl Nonlocal {
    pub fn scaled(self, w: f64) -> Self {
        Self { gradient: w * self.gradient, lagrangian: w * self.lagrangian, potential: w * self.potential }
    }
}

/// Node coefficients of the first variation. The first two multiply
/// `g(∇u, ∇v)`, the last two multiply `v`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PointCoefficients {
    pub kirchhoff: f64,
    pub lagrangian_grad: f64,
    pub lagrangian_zero: f64,
    pub potential: f64,
}

impl PointCoefficients {
    pub fn gradient_part(&self) -> f64 {
        self.kirchhoff + self.lagrangian_grad
    }

    pub fn value_part(&self) -> f64 {
        self.lagrangian_zero + self.potential
    }
}

pub trait Energy: Send + Sync {
    fn p(&self) -> f64;
    fn p_star(&self) -> f64;
    fn lambda(&self) -> f64;
    fn r(&self) -> f64;
    /// Integrands of the nonlocal quantities at one point.
    fn integrands(&self, grad_sq: f64, value: f64, t: f64) -> Nonlocal;
    fn energy_from(&self, nl: &Nonlocal) -> f64;
    fn coefficients(&self, nl: &Nonlocal, grad_sq: f64, value: f64, t: f64) -> PointCoefficients;
    /// The nonlinearity `f(u, t)` multiplying `−λ*` once the multiplier is
    /// folded into the eigenvalue parameter.
    fn reaction(&self, value: f64, t: f64) -> f64;
    /// Integrand of the raw constraint functional and its `u`-derivative.
    fn constraint_density(&self, value: f64, t: f64) -> f64;
    fn constraint_slope(&self, value: f64, t: f64) -> f64;
    /// Homogeneity degree of the constraint integrand in `u`.
    fn constraint_degree(&self) -> f64;
    fn constraint_target(&self, epsilon: f64, negative: bool) -> Result<f64>;
    fn lambda_star(&self, epsilon: f64, theta: f64) -> f64;
}

/// `|∇u|^{q}` from `|∇u|²`, with `0^0 = 1`.
fn grad_pow(grad_sq: f64, q: f64) -> f64 {
    if q == 0.0 {
        1.0
    } else {
        grad_sq.max(0.0).powf(0.5 * q)
    }
}

/// `|s|^{q-2} s`, zero at `s = 0`.
fn signed_pow(s: f64, q_minus_one: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.signum() * s.abs().powf(q_minus_one)
    }
}

// ---------------------------------------------------------------------------
// Kirchhoff

#[derive(Debug, Clone, PartialEq)]
pub struct KirchhoffSpec {
    pub p: f64,
    pub r: f64,
    pub lambda: f64,
    pub weight: Weight,
    pub n: usize,
    p_star: f64,
}

impl KirchhoffSpec {
    pub fn new(p: f64, r: f64, lambda: f64, weight: Weight, n: usize) -> Result<Self> {
        if !(p >= 2.0) {
            return Err(Error::InvalidSpec(format!("p = {p} < 2")));
        }
        if !(r > 1.0) {
            return Err(Error::InvalidSpec(format!("r = {r} must exceed 1")));
        }
        if !lambda.is_finite() {
            return Err(Error::InvalidSpec("λ must be finite".into()));
        }
        if !weight.vanishes_at_zero() {
            return Err(Error::InvalidSpec("Kirchhoff weight needs M(0) = 0".into()));
        }
        let p_star = critical_exponent(n, p)?;
        Ok(Self { p, r, lambda, weight, n, p_star })
    }
}

impl Energy for KirchhoffSpec {
    fn p(&self) -> f64 {
        self.p
    }
    fn p_star(&self) -> f64 {
        self.p_star
    }
    fn lambda(&self) -> f64 {
        self.lambda
    }
    fn r(&self) -> f64 {
        self.r
    }

    fn integrands(&self, grad_sq: f64, value: f64, _t: f64) -> Nonlocal {
        Nonlocal {
            gradient: grad_pow(grad_sq, self.p),
            lagrangian: 0.0,
            potential: value.abs().powf(self.p_star),
        }
    }

    fn energy_from(&self, nl: &Nonlocal) -> f64 {
        self.weight.primitive(nl.gradient / self.p)
            - self.lambda / (self.r + 1.0) * (nl.potential / self.p_star).powf(self.r + 1.0)
    }

    fn coefficients(&self, nl: &Nonlocal, grad_sq: f64, value: f64, _t: f64) -> PointCoefficients {
        PointCoefficients {
            kirchhoff: self.weight.m(nl.gradient / self.p) * grad_pow(grad_sq, self.p - 2.0),
            lagrangian_grad: 0.0,
            lagrangian_zero: 0.0,
            potential: -self.lambda
                * (nl.potential / self.p_star).powf(self.r)
                * signed_pow(value, self.p_star - 1.0),
        }
    }

    fn reaction(&self, value: f64, _t: f64) -> f64 {
        signed_pow(value, self.p_star - 1.0)
    }

    fn constraint_density(&self, value: f64, _t: f64) -> f64 {
        value.abs().powf(self.p_star)
    }

    fn constraint_slope(&self, value: f64, _t: f64) -> f64 {
        self.p_star * signed_pow(value, self.p_star - 1.0)
    }

    fn constraint_degree(&self) -> f64 {
        self.p_star
    }

    fn constraint_target(&self, epsilon: f64, negative: bool) -> Result<f64> {
        if negative {
            return Err(Error::InvalidArgument(
                "the L^{p*} constraint has no negative branch".into(),
            ));
        }
        crate::solver::constraint_target(epsilon, self.r, self.p_star)
    }

    fn lambda_star(&self, epsilon: f64, theta: f64) -> f64 {
        crate::solver::lambda_star_kirchhoff(epsilon, theta, self.lambda, self.r, self.p_star)
    }
}

// ---------------------------------------------------------------------------
// general energy

/// Leaf-independent factor `K(t)` of a weighted potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum DensityExpr {
    Unit,
    /// `1 + amplitude · cos(frequency · t)`, `|amplitude| < 1`.
    Cosine { amplitude: f64, frequency: f64 },
}

impl DensityExpr {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            DensityExpr::Unit => 1.0,
            DensityExpr::Cosine { amplitude, frequency } => 1.0 + amplitude * (frequency * t).cos(),
        }
    }

    pub fn max_value(&self) -> f64 {
        match self {
            DensityExpr::Unit => 1.0,
            DensityExpr::Cosine { amplitude, .. } => 1.0 + amplitude.abs(),
        }
    }
}

/// `L(s1, s2, t)` with `s1 = |∇u|²`, `s2 = u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum Lagrangian {
    /// `L = coefficient · s1`.
    Dirichlet {
        #[serde(default = "one")]
        coefficient: f64,
    },
    /// `L = s1 / 2 + mass · s2² / 2`.
    DirichletMass { mass: f64 },
    /// `L = value`.
    Constant { value: f64 },
    /// `L = s1^exponent`, `exponent ≥ 1`.
    GradientPower { exponent: f64 },
}

fn one() -> f64 {
    1.0
}

impl Lagrangian {
    pub fn value(&self, s1: f64, s2: f64, _t: f64) -> f64 {
        match self {
            Lagrangian::Dirichlet { coefficient } => coefficient * s1,
            Lagrangian::DirichletMass { mass } => 0.5 * s1 + 0.5 * mass * s2 * s2,
            Lagrangian::Constant { value } => *value,
            Lagrangian::GradientPower { exponent } => s1.max(0.0).powf(*exponent),
        }
    }

    /// `(∂L/∂s1, ∂L/∂s2)`.
    pub fn partials(&self, s1: f64, s2: f64, _t: f64) -> (f64, f64) {
        match self {
            Lagrangian::Dirichlet { coefficient } => (*coefficient, 0.0),
            Lagrangian::DirichletMass { mass } => (0.5, mass * s2),
            Lagrangian::Constant { .. } => (0.0, 0.0),
            Lagrangian::GradientPower { exponent } => {
                (exponent * s1.max(0.0).powf(exponent - 1.0), 0.0)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Lagrangian::GradientPower { exponent } if !(*exponent >= 1.0) => {
                Err(Error::InvalidSpec(format!("gradient-power exponent {exponent} < 1")))
            }
            Lagrangian::DirichletMass { mass } if !(*mass >= 0.0) => {
                Err(Error::InvalidSpec(format!("mass {mass} < 0")))
            }
            _ => Ok(()),
        }
    }
}

/// `F(s, t)` with `F(0, ·) ≡ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum Potential {
    /// `F = |s|^q / q`.
    PowerPotential { q: f64 },
    /// `F = K(t) |s|^q / q`.
    WeightedPower { q: f64, density: DensityExpr },
    /// `F = coefficient · s`.
    Linear {
        #[serde(default = "one")]
        coefficient: f64,
    },
}

impl Potential {
    pub fn value(&self, s: f64, t: f64) -> f64 {
        match self {
            Potential::PowerPotential { q } => s.abs().powf(*q) / q,
            Potential::WeightedPower { q, density } => density.value(t) * s.abs().powf(*q) / q,
            Potential::Linear { coefficient } => coefficient * s,
        }
    }

    /// `f(s, t) = ∂F/∂s`.
    pub fn slope(&self, s: f64, t: f64) -> f64 {
        match self {
            Potential::PowerPotential { q } => signed_pow(s, q - 1.0),
            Potential::WeightedPower { q, density } => density.value(t) * signed_pow(s, q - 1.0),
            Potential::Linear { coefficient } => *coefficient,
        }
    }

    pub fn degree(&self) -> f64 {
        match self {
            Potential::PowerPotential { q } | Potential::WeightedPower { q, .. } => *q,
            Potential::Linear { .. } => 1.0,
        }
    }

    /// A growth witness `|f(s,t)| ≤ a + b |s|^{p*-1}` valid for `1 ≤ q ≤ p*`.
    fn default_growth(&self) -> GrowthWitness {
        let c = match self {
            Potential::PowerPotential { .. } => 1.0,
            Potential::WeightedPower { density, .. } => density.max_value(),
            Potential::Linear { coefficient } => coefficient.abs().max(1.0),
        };
        GrowthWitness { a: c, b: c }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Potential::PowerPotential { q } | Potential::WeightedPower { q, .. } if !(*q > 1.0) => {
                Err(Error::InvalidSpec(format!("potential exponent {q} must exceed 1")))
            }
            Potential::WeightedPower { density: DensityExpr::Cosine { amplitude, .. }, .. }
                if !(amplitude.abs() < 1.0) =>
            {
                Err(Error::InvalidSpec("cosine density needs |amplitude| < 1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Constants of the growth bound `|f(s,t)| ≤ a + b|s|^{p*−1}`; `a` is taken
/// constant in `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthWitness {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralEnergySpec {
    pub p: f64,
    pub r: f64,
    pub lambda: f64,
    pub a: f64,
    pub weight: Weight,
    pub lagrangian: Lagrangian,
    pub potential: Potential,
    pub growth: GrowthWitness,
    pub n: usize,
    p_star: f64,
}

impl GeneralEnergySpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        p: f64,
        r: f64,
        lambda: f64,
        a: f64,
        weight: Weight,
        lagrangian: Lagrangian,
        potential: Potential,
        growth: Option<GrowthWitness>,
        n: usize,
    ) -> Result<Self> {
        if !(p >= 2.0) {
            return Err(Error::InvalidSpec(format!("p = {p} < 2")));
        }
        if !(r > 0.0) || !(a > 0.0) {
            return Err(Error::InvalidSpec(format!("need r > 0 and a > 0 (r = {r}, a = {a})")));
        }
        if !lambda.is_finite() {
            return Err(Error::InvalidSpec("λ must be finite".into()));
        }
        lagrangian.validate()?;
        potential.validate()?;
        let p_star = critical_exponent(n, p)?;
        let growth = growth.unwrap_or_else(|| potential.default_growth());
        if !(growth.b > 0.0) || !(growth.a >= 0.0) {
            return Err(Error::InvalidSpec("growth witness needs a ≥ 0, b > 0".into()));
        }
        let spec = Self { p, r, lambda, a, weight, lagrangian, potential, growth, n, p_star };
        spec.validate_growth_sampled()?;
        Ok(spec)
    }

    fn growth_holds(&self, s: f64, t: f64) -> bool {
        let bound = self.growth.a + self.growth.b * s.abs().powf(self.p_star - 1.0);
        self.potential.slope(s, t).abs() <= bound * (1.0 + 1e-12)
    }

    /// Sampling-based guard on `s ∈ [-20, 20]`, `t ∈ [0, 2π]`; a heuristic,
    /// not a proof.
    pub fn validate_growth_sampled(&self) -> Result<()> {
        for i in 0..=400 {
            let s = -20.0 + 0.1 * i as f64;
            for j in 0..64 {
                let t = 2.0 * PI * j as f64 / 64.0;
                if !self.growth_holds(s, t) {
                    return Err(Error::Growth(format!(
                        "|f({s}, {t})| = {} exceeds a + b|s|^(p*-1)",
                        self.potential.slope(s, t).abs()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks the growth bound at the values of `u`.
    pub fn check_growth(&self, grid: &QuotientGrid, u: &BasicFunction) -> Result<()> {
        for (&t, &s) in grid.nodes().iter().zip(u.values()) {
            if !self.growth_holds(s, t) {
                return Err(Error::Growth(format!("growth bound fails at t = {t}, u = {s}")));
            }
        }
        Ok(())
    }
}

impl Energy for GeneralEnergySpec {
    fn p(&self) -> f64 {
        self.p
    }
    fn p_star(&self) -> f64 {
        self.p_star
    }
    fn lambda(&self) -> f64 {
        self.lambda
    }
    fn r(&self) -> f64 {
        self.r
    }

    fn integrands(&self, grad_sq: f64, value: f64, t: f64) -> Nonlocal {
        Nonlocal {
            gradient: grad_pow(grad_sq, self.p),
            lagrangian: self.lagrangian.value(grad_sq, value, t),
            potential: self.potential.value(value, t),
        }
    }

    fn energy_from(&self, nl: &Nonlocal) -> f64 {
        self.weight.primitive(nl.gradient) * nl.lagrangian
            - self.lambda / self.a * nl.potential.powf(self.r + 1.0)
    }

    fn coefficients(&self, nl: &Nonlocal, grad_sq: f64, value: f64, t: f64) -> PointCoefficients {
        let big_m = self.weight.primitive(nl.gradient);
        let (l_s1, l_s2) = self.lagrangian.partials(grad_sq, value, t);
        PointCoefficients {
            kirchhoff: self.p * self.weight.m(nl.gradient) * grad_pow(grad_sq, self.p - 2.0) * nl.lagrangian,
            lagrangian_grad: 2.0 * big_m * l_s1,
            lagrangian_zero: big_m * l_s2,
            potential: -self.lambda / self.a
                * (self.r + 1.0)
                * nl.potential.powf(self.r)
                * self.potential.slope(value, t),
        }
    }

    fn reaction(&self, value: f64, t: f64) -> f64 {
        self.potential.slope(value, t)
    }

    fn constraint_density(&self, value: f64, t: f64) -> f64 {
        self.potential.value(value, t)
    }

    fn constraint_slope(&self, value: f64, t: f64) -> f64 {
        self.potential.slope(value, t)
    }

    fn constraint_degree(&self) -> f64 {
        self.potential.degree()
    }

    fn constraint_target(&self, epsilon: f64, negative: bool) -> Result<f64> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("ε = {epsilon} must be positive")));
        }
        let level = (self.a * epsilon).powf(1.0 / (self.r + 1.0));
        Ok(if negative { -level } else { level })
    }

    fn lambda_star(&self, epsilon: f64, theta: f64) -> f64 {
        crate::solver::lambda_star_general(epsilon, theta, self.lambda, self.a, self.r)
    }
}

// ---------------------------------------------------------------------------
// spec files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SpecJson {
    Kirchhoff {
        p: f64,
        r: f64,
        lambda: f64,
        weight: WeightJson,
    },
    General {
        p: f64,
        r: f64,
        lambda: f64,
        a: f64,
        weight: WeightJson,
        lagrangian: Lagrangian,
        potential: Potential,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        growth: Option<GrowthWitness>,
    },
}

impl SpecJson {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Binds the spec to a manifold dimension (which fixes `p*`).
    pub fn build(&self, n: usize) -> Result<EnergySpec> {
        match self {
            SpecJson::Kirchhoff { p, r, lambda, weight } => Ok(EnergySpec::Kirchhoff(
                KirchhoffSpec::new(*p, *r, *lambda, Weight::from_json(weight)?, n)?,
            )),
            SpecJson::General { p, r, lambda, a, weight, lagrangian, potential, growth } => {
                Ok(EnergySpec::General(GeneralEnergySpec::new(
                    *p,
                    *r,
                    *lambda,
                    *a,
                    Weight::from_json(weight)?,
                    lagrangian.clone(),
                    potential.clone(),
                    *growth,
                    n,
                )?))
            }
        }
    }
}

/// Either energy family, dispatching [`Energy`].
#[derive(Debug, Clone, PartialEq)]
pub enum EnergySpec {
    Kirchhoff(KirchhoffSpec),
    General(GeneralEnergySpec),
}

impl EnergySpec {
    pub fn to_json(&self) -> SpecJson {
        match self {
            EnergySpec::Kirchhoff(k) => SpecJson::Kirchhoff {
                p: k.p,
                r: k.r,
                lambda: k.lambda,
                weight: k.weight.to_json(),
            },
            EnergySpec::General(g) => SpecJson::General {
                p: g.p,
                r: g.r,
                lambda: g.lambda,
                a: g.a,
                weight: g.weight.to_json(),
                lagrangian: g.lagrangian.clone(),
                potential: g.potential.clone(),
                growth: Some(g.growth),
            },
        }
    }

    /// Copy with a different `λ`.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            EnergySpec::Kirchhoff(k) => k.lambda = lambda,
            EnergySpec::General(g) => g.lambda = lambda,
        }
        out
    }

    fn inner(&self) -> &dyn Energy {
        match self {
            EnergySpec::Kirchhoff(k) => k,
            EnergySpec::General(g) => g,
        }
    }
}

impl Energy for EnergySpec {
    fn p(&self) -> f64 {
        self.inner().p()
    }
    fn p_star(&self) -> f64 {
        self.inner().p_star()
    }
    fn lambda(&self) -> f64 {
        self.inner().lambda()
    }
    fn r(&self) -> f64 {
        self.inner().r()
    }
    fn integrands(&self, grad_sq: f64, value: f64, t: f64) -> Nonlocal {
        self.inner().integrands(grad_sq, value, t)
    }
    fn energy_from(&self, nl: &Nonlocal) -> f64 {
        self.inner().energy_from(nl)
    }
    fn coefficients(&self, nl: &Nonlocal, grad_sq: f64, value: f64, t: f64) -> PointCoefficients {
        self.inner().coefficients(nl, grad_sq, value, t)
    }
    fn reaction(&self, value: f64, t: f64) -> f64 {
        self.inner().reaction(value, t)
    }
    fn constraint_density(&self, value: f64, t: f64) -> f64 {
        self.inner().constraint_density(value, t)
    }
    fn constraint_slope(&self, value: f64, t: f64) -> f64 {
        self.inner().constraint_slope(value, t)
    }
    fn constraint_degree(&self) -> f64 {
        self.inner().constraint_degree()
    }
    fn constraint_target(&self, epsilon: f64, negative: bool) -> Result<f64> {
        self.inner().constraint_target(epsilon, negative)
    }
    fn lambda_star(&self, epsilon: f64, theta: f64) -> f64 {
        self.inner().lambda_star(epsilon, theta)
    }
}

// ---------------------------------------------------------------------------
// reduced-grid evaluation

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub kirchhoff_term: f64,
    pub lagrangian_grad_term: f64,
    pub lagrangian_zero_term: f64,
    pub potential_term: f64,
}

impl Decomposition {
    pub fn total(&self) -> f64 {
        self.kirchhoff_term + self.lagrangian_grad_term + self.lagrangian_zero_term + self.potential_term
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionalDerivative {
    pub value: f64,
    pub decomposition: Decomposition,
}

fn check_on(grid: &QuotientGrid, u: &BasicFunction) -> Result<()> {
    if u.grid().same_as(grid) {
        Ok(())
    } else {
        Err(Error::GridMismatch("function does not live on this grid".into()))
    }
}

/// Nonlocal integrals of `u` and its discrete derivative.
pub fn reduced_nonlocal(energy: &impl Energy, grid: &QuotientGrid, u: &[f64]) -> (Nonlocal, Vec<f64>) {
    let du = grid.derivative_of(u);
    let mut nl = Nonlocal::default();
    for i in 0..u.len() {
        let w = grid.weights()[i];
        if w == 0.0 {
            continue;
        }
        nl += energy.integrands(du[i] * du[i], u[i], grid.nodes()[i]).scaled(w);
    }
    (nl, du)
}

pub fn energy_value(energy: &impl Energy, grid: &QuotientGrid, u: &BasicFunction) -> Result<f64> {
    check_on(grid, u)?;
    let (nl, _) = reduced_nonlocal(energy, grid, u.values());
    Ok(energy.energy_from(&nl))
}

pub fn directional_derivative(
    energy: &impl Energy,
    grid: &QuotientGrid,
    u: &BasicFunction,
    v: &BasicFunction,
) -> Result<DirectionalDerivative> {
    check_on(grid, u)?;
    check_on(grid, v)?;
    let (nl, du) = reduced_nonlocal(energy, grid, u.values());
    let dv = grid.derivative_of(v.values());
    let mut d = Decomposition::default();
    for i in 0..du.len() {
        let w = grid.weights()[i];
        if w == 0.0 {
            continue;
        }
        let (ui, vi, t) = (u.values()[i], v.values()[i], grid.nodes()[i]);
        let c = energy.coefficients(&nl, du[i] * du[i], ui, t);
        let g = du[i] * dv[i];
        d.kirchhoff_term += w * c.kirchhoff * g;
        d.lagrangian_grad_term += w * c.lagrangian_grad * g;
        d.lagrangian_zero_term += w * c.lagrangian_zero * vi;
        d.potential_term += w * c.potential * vi;
    }
    Ok(DirectionalDerivative { value: d.total(), decomposition: d })
}

/// The basic coefficient functions `(L1, L2)` with
/// `dJ(u)[v] = Σ w_i (L1_i u'_i v'_i + L2_i v_i)`.
pub fn basic_coefficients(energy: &impl Energy, grid: &QuotientGrid, u: &BasicFunction) -> Result<(Vec<f64>, Vec<f64>)> {
    check_on(grid, u)?;
    let (nl, du) = reduced_nonlocal(energy, grid, u.values());
    let mut l1 = Vec::with_capacity(du.len());
    let mut l2 = Vec::with_capacity(du.len());
    for i in 0..du.len() {
        let c = energy.coefficients(&nl, du[i] * du[i], u.values()[i], grid.nodes()[i]);
        l1.push(c.gradient_part());
        l2.push(c.value_part());
    }
    Ok((l1, l2))
}

/// `d_i = dJ(u)[e_i]` for every nodal basis function; equivalently
/// `Dᵀ(w ∘ L1 ∘ u') + w ∘ L2`.
pub fn derivative_vector(energy: &impl Energy, grid: &QuotientGrid, u: &[f64]) -> Vec<f64> {
    let (nl, du) = reduced_nonlocal(energy, grid, u);
    let n = u.len();
    let mut flux = vec![0.0; n];
    let mut out = vec![0.0; n];
    for i in 0..n {
        let w = grid.weights()[i];
        if w == 0.0 {
            continue;
        }
        let c = energy.coefficients(&nl, du[i] * du[i], u[i], grid.nodes()[i]);
        flux[i] = w * c.gradient_part() * du[i];
        out[i] = w * c.value_part();
    }
    for (o, f) in out.iter_mut().zip(grid.derivative_transpose(&flux)) {
        *o += f;
    }
    out
}

/// `dJ_{λ*}(u)[e_i]` where the potential part is replaced by `−λ* f(u)`.
pub fn stationarity_vector(energy: &impl Energy, grid: &QuotientGrid, u: &[f64], lambda_star: f64) -> Vec<f64> {
    let (nl, du) = reduced_nonlocal(energy, grid, u);
    let n = u.len();
    let mut flux = vec![0.0; n];
    let mut out = vec![0.0; n];
    for i in 0..n {
        let w = grid.weights()[i];
        if w == 0.0 {
            continue;
        }
        let t = grid.nodes()[i];
        let c = energy.coefficients(&nl, du[i] * du[i], u[i], t);
        flux[i] = w * c.gradient_part() * du[i];
        out[i] = w * (c.lagrangian_zero - lambda_star * energy.reaction(u[i], t));
    }
    for (o, f) in out.iter_mut().zip(grid.derivative_transpose(&flux)) {
        *o += f;
    }
    out
}

pub fn energy_kirchhoff(spec: &KirchhoffSpec, grid: &QuotientGrid, u: &BasicFunction) -> Result<f64> {
    energy_value(spec, grid, u)
}

pub fn denergy_kirchhoff(
    spec: &KirchhoffSpec,
    grid: &QuotientGrid,
    u: &BasicFunction,
    v: &BasicFunction,
) -> Result<DirectionalDerivative> {
    directional_derivative(spec, grid, u, v)
}

pub fn energy_general(spec: &GeneralEnergySpec, grid: &QuotientGrid, u: &BasicFunction) -> Result<f64> {
    spec.check_growth(grid, u)?;
    energy_value(spec, grid, u)
}

pub fn denergy_general(
    spec: &GeneralEnergySpec,
    grid: &QuotientGrid,
    u: &BasicFunction,
    v: &BasicFunction,
) -> Result<DirectionalDerivative> {
    spec.check_growth(grid, u)?;
    directional_derivative(spec, grid, u, v)
}

/// Raw constraint `∫|u|^{p*}` (the target is subtracted by the solver).
pub fn constraint_g(grid: &QuotientGrid, u: &BasicFunction, p_star: f64) -> Result<f64> {
    check_on(grid, u)?;
    if !(p_star > 1.0) {
        return Err(Error::InvalidArgument(format!("p* = {p_star} must exceed 1")));
    }
    Ok(grid.weights().iter().zip(u.values()).map(|(w, v)| w * v.abs().powf(p_star)).sum())
}

/// `dG(u)[v] = p* ∫|u|^{p*−2} u v`.
pub fn dconstraint_g(grid: &QuotientGrid, u: &BasicFunction, v: &BasicFunction, p_star: f64) -> Result<f64> {
    check_on(grid, u)?;
    check_on(grid, v)?;
    if !(p_star > 1.0) {
        return Err(Error::InvalidArgument(format!("p* = {p_star} must exceed 1")));
    }
    Ok(grid
        .weights()
        .iter()
        .zip(u.values().iter().zip(v.values()))
        .map(|(w, (a, b))| w * p_star * signed_pow(*a, p_star - 1.0) * b)
        .sum())
}

/// `∫ F(u(t), t) V dt`.
pub fn constraint_general(spec: &GeneralEnergySpec, grid: &QuotientGrid, u: &BasicFunction) -> Result<f64> {
    check_on(grid, u)?;
    Ok(grid
        .weights()
        .iter()
        .zip(grid.nodes().iter().zip(u.values()))
        .map(|(w, (t, s))| w * spec.potential.value(*s, *t))
        .sum())
}

/// Generic raw constraint `∫ c(u, t)` for any energy.
pub fn constraint_raw(energy: &impl Energy, grid: &QuotientGrid, u: &[f64]) -> f64 {
    grid.weights()
        .iter()
        .zip(grid.nodes().iter().zip(u))
        .map(|(w, (t, s))| if *w == 0.0 { 0.0 } else { w * energy.constraint_density(*s, *t) })
        .sum()
}

/// Sampled estimate of the coercivity constant
/// `inf M(∫|∇u|^p)∫L / ‖u‖_{1,p}^p` over random trigonometric `u`. It only
/// bounds the true constant from above.
pub fn coercivity_estimate(spec: &GeneralEnergySpec, grid: &QuotientGrid, samples: usize, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let len = grid.model().length();
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let coeffs: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&t| {
                coeffs.iter().enumerate().map(|(k, c)| c * (PI * k as f64 * t / len).cos()).sum()
            })
            .collect();
        let (nl, du) = reduced_nonlocal(spec, grid, &u);
        let norm: f64 = grid
            .weights()
            .iter()
            .zip(u.iter().zip(&du))
            .map(|(w, (a, b))| w * (a.abs().powf(spec.p) + b.abs().powf(spec.p)))
            .sum();
        if norm > 0.0 {
            best = best.min(spec.weight.primitive(nl.gradient) * nl.lagrangian / norm);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::*;
    use std::sync::Arc;

    fn torus_grid(n: usize) -> Arc<QuotientGrid> {
        Arc::new(QuotientGrid::new(make_flat_torus_model(3, 2).unwrap().quotient, n).unwrap())
    }

    fn kirchhoff(lambda: f64, r: f64) -> KirchhoffSpec {
        KirchhoffSpec::new(2.0, r, lambda, Weight::Power { exponent: 0.0 }, 3).unwrap()
    }

    #[test]
    fn weights_are_consistent() {
        for w in [
            WeightJson::Power { exponent: 0.0 },
            WeightJson::Power { exponent: 1.5 },
            WeightJson::Affine { c0: 1.0, c1: 0.5 },
            WeightJson::Table { samples: vec![[0.0, 1.0], [1.0, 1.5], [2.0, 3.0], [4.0, 3.5]] },
            WeightJson::Constant { value: 2.0 },
        ] {
            let weight = Weight::from_json(&w).unwrap();
            assert_eq!(weight.to_json(), w);
        }
        assert_eq!(Weight::Power { exponent: 0.0 }.primitive(3.0), 3.0);
        // decreasing m -> concave M
        let bad = WeightJson::Table { samples: vec![[0.0, 3.0], [1.0, 1.0], [2.0, 0.5]] };
        assert!(Weight::from_json(&bad).is_err());
    }

    #[test]
    fn kirchhoff_energy_examples() {
        let g = torus_grid(128);
        let spec = kirchhoff(1.3, 2.0);
        let zero = BasicFunction::constant(g.clone(), 0.0);
        assert_eq!(energy_kirchhoff(&spec, &g, &zero).unwrap(), 0.0);
        let c: f64 = 0.8;
        let vol = (2.0 * PI).powi(3);
        let expected = -(1.3 / 3.0) * (vol * c.powi(6) / 6.0).powi(3);
        let got = energy_kirchhoff(&spec, &g, &BasicFunction::constant(g.clone(), c)).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected.abs());
        let g = torus_grid(1024);
        let spec0 = kirchhoff(0.0, 2.0);
        let s = BasicFunction::from_fn(g.clone(), f64::sin);
        let e = energy_kirchhoff(&spec0, &g, &s).unwrap();
        let exact = 0.5 * 4.0 * PI * PI * PI;
        assert!((e - exact).abs() < 1e-4 * exact);
    }

    #[test]
    fn kirchhoff_derivative_examples() {
        let g = torus_grid(64);
        let spec = kirchhoff(0.7, 2.5);
        let zero = BasicFunction::constant(g.clone(), 0.0);
        let v = BasicFunction::from_fn(g.clone(), |t| t.cos() + 0.2);
        assert_eq!(denergy_kirchhoff(&spec, &g, &zero, &v).unwrap().value, 0.0);
        let c: f64 = 0.9;
        let vol = (2.0 * PI).powi(3);
        let one = BasicFunction::constant(g.clone(), 1.0);
        let d = denergy_kirchhoff(&spec, &g, &BasicFunction::constant(g.clone(), c), &one).unwrap();
        let expected = -0.7 * (vol * c.powi(6) / 6.0).powf(2.5) * vol * c.powi(5);
        assert!((d.value - expected).abs() < 1e-12 * expected.abs());
        assert_eq!(d.decomposition.kirchhoff_term, 0.0);
    }

    #[test]
    fn general_reduces_to_kirchhoff() {
        let g = torus_grid(200);
        let vol = g.volume();
        let (p, r, lambda) = (2.0, 2.0, 0.8);
        let kir = kirchhoff(lambda, r);
        let gen = GeneralEnergySpec::new(
            p,
            r,
            lambda,
            r + 1.0,
            Weight::Power { exponent: 0.0 },
            Lagrangian::Constant { value: 1.0 / (p * vol) },
            Potential::PowerPotential { q: 6.0 },
            None,
            3,
        )
        .unwrap();
        let u = BasicFunction::from_fn(g.clone(), |t| 0.3 + 0.2 * t.sin() - 0.1 * (3.0 * t).cos());
        let v = BasicFunction::from_fn(g.clone(), |t| (2.0 * t).sin() + 0.5);
        let ek = energy_kirchhoff(&kir, &g, &u).unwrap();
        let eg = energy_general(&gen, &g, &u).unwrap();
        assert!((ek - eg).abs() < 1e-12 * ek.abs());
        let dk = denergy_kirchhoff(&kir, &g, &u, &v).unwrap().value;
        let dg = denergy_general(&gen, &g, &u, &v).unwrap().value;
        assert!((dk - dg).abs() < 1e-12 * dk.abs());
        // constraint functional reduces to G_raw / p*
        let cg = constraint_general(&gen, &g, &u).unwrap();
        let graw = constraint_g(&g, &u, 6.0).unwrap();
        assert!((cg - graw / 6.0).abs() < 1e-14 * cg);
    }

    #[test]
    fn general_zero_and_monomial_lagrangian() {
        let g = torus_grid(100);
        let gen = GeneralEnergySpec::new(
            2.0,
            1.0,
            1.0,
            2.0,
            Weight::Affine { c0: 1.0, c1: 0.0 },
            Lagrangian::GradientPower { exponent: 2.0 },
            Potential::PowerPotential { q: 4.0 },
            None,
            3,
        )
        .unwrap();
        let zero = BasicFunction::constant(g.clone(), 0.0);
        assert_eq!(energy_general(&gen, &g, &zero).unwrap(), 0.0);
        // L = s1²: L_s1 term = M(‖∇u‖²) ∫ 2|∇u|² · 2 g(∇u,∇v)
        let u = BasicFunction::from_fn(g.clone(), |t| t.sin());
        let v = BasicFunction::from_fn(g.clone(), |t| (2.0 * t).cos());
        let d = denergy_general(&gen, &g, &u, &v).unwrap();
        let du = g.derivative_of(u.values());
        let dv = g.derivative_of(v.values());
        let grad_p: f64 = g.weights().iter().zip(&du).map(|(w, x)| w * x * x).sum();
        let big_m = grad_p; // M(t) = t
        let oracle: f64 = g
            .weights()
            .iter()
            .zip(du.iter().zip(&dv))
            .map(|(w, (a, b))| w * 2.0 * a * a * 2.0 * a * b)
            .sum::<f64>()
            * big_m;
        assert!((d.decomposition.lagrangian_grad_term - oracle).abs() < 1e-12 * oracle.abs().max(1.0));
    }

    #[test]
    fn constraint_derivative_examples() {
        let g = torus_grid(80);
        let u = BasicFunction::from_fn(g.clone(), |t| 0.5 + 0.3 * t.cos());
        let graw = constraint_g(&g, &u, 6.0).unwrap();
        let dgu = dconstraint_g(&g, &u, &u, 6.0).unwrap();
        assert!((dgu - 6.0 * graw).abs() < 1e-13 * dgu);
        let one = BasicFunction::constant(g.clone(), 1.0);
        assert!((constraint_g(&g, &one, 6.0).unwrap() - (2.0 * PI).powi(3)).abs() < 1e-10);
        let v = BasicFunction::from_fn(g.clone(), |t| (3.0 * t).sin() + 0.1);
        let h = 1e-6;
        let plus = BasicFunction::new(g.clone(), u.values().iter().zip(v.values()).map(|(a, b)| a + h * b).collect()).unwrap();
        let minus = BasicFunction::new(g.clone(), u.values().iter().zip(v.values()).map(|(a, b)| a - h * b).collect()).unwrap();
        let fd = (constraint_g(&g, &plus, 6.0).unwrap() - constraint_g(&g, &minus, 6.0).unwrap()) / (2.0 * h);
        let an = dconstraint_g(&g, &u, &v, 6.0).unwrap();
        assert!((fd - an).abs() < 1e-6 * an.abs());
    }

    #[test]
    fn constraint_general_examples() {
        let g = torus_grid(50);
        let lin = GeneralEnergySpec::new(
            2.0,
            1.0,
            1.0,
            1.0,
            Weight::Constant { value: 1.0 },
            Lagrangian::Dirichlet { coefficient: 1.0 },
            Potential::Linear { coefficient: 1.0 },
            None,
            3,
        )
        .unwrap();
        let c = 1.7;
        let got = constraint_general(&lin, &g, &BasicFunction::constant(g.clone(), c)).unwrap();
        assert!((got - c * g.volume()).abs() < 1e-12 * got);
        let pw = GeneralEnergySpec::new(
            2.0,
            1.0,
            1.0,
            1.0,
            Weight::Constant { value: 1.0 },
            Lagrangian::Dirichlet { coefficient: 1.0 },
            Potential::PowerPotential { q: 3.0 },
            None,
            3,
        )
        .unwrap();
        assert_eq!(constraint_general(&pw, &g, &BasicFunction::constant(g.clone(), 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn growth_violation_is_reported() {
        let err = GeneralEnergySpec::new(
            2.0,
            1.0,
            1.0,
            1.0,
            Weight::Constant { value: 1.0 },
            Lagrangian::Dirichlet { coefficient: 1.0 },
            Potential::PowerPotential { q: 8.0 },
            None,
            3,
        );
        assert!(matches!(err, Err(Error::Growth(_))));
    }

    #[test]
    fn basic_coefficients_reproduce_derivative() {
        let g = torus_grid(90);
        let spec = kirchhoff(1.1, 2.0);
        let u = BasicFunction::from_fn(g.clone(), |t| 0.4 + 0.25 * t.sin());
        let (l1, l2) = basic_coefficients(&spec, &g, &u).unwrap();
        let du = g.derivative_of(u.values());
        for k in 0..5 {
            let v = BasicFunction::from_fn(g.clone(), |t| ((k + 1) as f64 * t).cos() + 0.1 * k as f64);
            let dv = g.derivative_of(v.values());
            let rep: f64 = (0..g.len())
                .map(|i| g.weights()[i] * (l1[i] * du[i] * dv[i] + l2[i] * v.values()[i]))
                .sum();
            let d = denergy_kirchhoff(&spec, &g, &u, &v).unwrap().value;
            assert!((rep - d).abs() < 1e-10 * d.abs().max(1e-3));
        }
    }

    #[test]
    fn derivative_vector_matches_directional_derivative() {
        let g = Arc::new(QuotientGrid::new(make_sphere_clifford_model().quotient, 41).unwrap());
        let spec = kirchhoff(0.9, 2.0);
        let u = BasicFunction::from_fn(g.clone(), |t| 0.3 + 0.2 * (2.0 * t).cos());
        let d = derivative_vector(&spec, &g, u.values());
        let v = BasicFunction::from_fn(g.clone(), |t| t * t - 0.3);
        let dot: f64 = d.iter().zip(v.values()).map(|(a, b)| a * b).sum();
        let dd = directional_derivative(&spec, &g, &u, &v).unwrap().value;
        assert!((dot - dd).abs() < 1e-12 * dd.abs().max(1.0));
    }

    #[test]
    fn spec_json_round_trip() {
        let text = r#"{"type":"general","p":2,"r":1,"lambda":1,"a":2,
            "weight":{"kind":"constant","value":1},
            "lagrangian":{"preset":"dirichlet-mass","mass":1},
            "potential":{"preset":"weighted-power","q":4,"density":{"name":"cosine","amplitude":0.5,"frequency":1}}}"#;
        let spec = SpecJson::from_json(text).unwrap();
        let built = spec.build(3).unwrap();
        assert_eq!(built.p_star(), 6.0);
        let again = SpecJson::from_json(&serde_json::to_string(&built.to_json()).unwrap()).unwrap();
        assert_eq!(again.build(3).unwrap(), built);
        let k = SpecJson::from_json(r#"{"type":"kirchhoff","p":2,"r":2,"lambda":1,"weight":{"kind":"power","exponent":0}}"#).unwrap();
        assert!(matches!(k.build(3).unwrap(), EnergySpec::Kirchhoff(_)));
        assert!(k.build(2).is_err());
        let bad = SpecJson::from_json(r#"{"type":"kirchhoff","p":2,"r":2,"lambda":1,"weight":{"kind":"constant","value":1}}"#).unwrap();
        assert!(bad.build(3).is_err());
    }

    #[test]
    fn coercivity_estimate_is_positive_for_mass_lagrangian() {
        let g = torus_grid(64);
        let spec = GeneralEnergySpec::new(
            2.0,
            1.0,
            1.0,
            2.0,
            Weight::Constant { value: 1.0 },
            Lagrangian::DirichletMass { mass: 1.0 },
            Potential::PowerPotential { q: 4.0 },
            None,
            3,
        )
        .unwrap();
        let c = coercivity_estimate(&spec, &g, 20, 7);
        assert!(c >= 0.5 - 1e-12 && c.is_finite());
    }
}
