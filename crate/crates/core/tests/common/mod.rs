#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use symred::basic::{BasicFunction, QuotientGrid};
use symred::functionals::*;

pub fn kirchhoff(p: f64, r: f64, lambda: f64, weight: WeightJson) -> SpecJson {
    SpecJson::Kirchhoff { p, r, lambda, weight }
}

pub fn general(lagrangian: Lagrangian, potential: Potential) -> SpecJson {
    SpecJson::General {
        p: 2.0,
        r: 1.0,
        lambda: 1.0,
        a: 2.0,
        weight: WeightJson::Affine { c0: 1.0, c1: 0.5 },
        lagrangian,
        potential,
        growth: None,
    }
}

/// Smooth non-constant minimizers on both eligible models.
pub fn concave_general(frequency: f64) -> SpecJson {
    SpecJson::General {
        p: 2.0,
        r: 1.0,
        lambda: 1.0,
        a: 2.0,
        weight: WeightJson::Constant { value: 1.0 },
        lagrangian: Lagrangian::DirichletMass { mass: 1.0 },
        potential: Potential::WeightedPower {
            q: 1.5,
            density: DensityExpr::Cosine { amplitude: 0.5, frequency },
        },
        growth: None,
    }
}

/// The spec presets exercised by the derivative checks.
pub fn presets() -> Vec<(&'static str, SpecJson)> {
    vec![
        ("kirchhoff-linear", kirchhoff(2.0, 2.0, 1.0, WeightJson::Power { exponent: 0.0 })),
        ("kirchhoff-power", kirchhoff(2.5, 1.5, 0.7, WeightJson::Power { exponent: 1.0 })),
        ("kirchhoff-affine", kirchhoff(2.0, 1.2, 1.3, WeightJson::Affine { c0: 1.0, c1: 0.25 })),
        (
            "kirchhoff-table",
            kirchhoff(2.0, 2.0, 0.5, WeightJson::Table { samples: vec![[0.0, 1.0], [1.0, 1.5], [4.0, 2.0], [50.0, 3.0]] }),
        ),
        ("dirichlet/power-potential", general(Lagrangian::Dirichlet { coefficient: 1.0 }, Potential::PowerPotential { q: 4.0 })),
        (
            "dirichlet-mass/weighted-power",
            general(
                Lagrangian::DirichletMass { mass: 0.8 },
                Potential::WeightedPower { q: 3.0, density: DensityExpr::Cosine { amplitude: 0.4, frequency: 2.0 } },
            ),
        ),
        ("gradient-power/linear", general(Lagrangian::GradientPower { exponent: 1.5 }, Potential::Linear { coefficient: 0.7 })),
        ("constant/weighted-unit", general(Lagrangian::Constant { value: 0.3 }, Potential::WeightedPower { q: 2.5, density: DensityExpr::Unit })),
    ]
}

/// A random trigonometric polynomial in the quotient coordinate, periodic on
/// circles and even at the ends of intervals.
pub fn smooth_random(grid: &Arc<QuotientGrid>, rng: &mut ChaCha8Rng, offset: f64, amplitude: f64) -> BasicFunction {
    let length = grid.model().length();
    let periodic = grid.is_periodic();
    let coeffs: Vec<(f64, f64)> = (1..=4).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    BasicFunction::from_fn(grid.clone(), |t| {
        let mut s = offset;
        for (k, (a, b)) in coeffs.iter().enumerate() {
            let k = (k + 1) as f64;
            if periodic {
                let x = 2.0 * PI * k * t / length;
                s += amplitude / k * (a * x.cos() + b * x.sin());
            } else {
                s += amplitude / k * a * (PI * k * t / length).cos();
            }
        }
        s
    })
}

/// Independent random node values.
pub fn rough_random(grid: &Arc<QuotientGrid>, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> BasicFunction {
    let values = (0..grid.len()).map(|_| rng.gen_range(lo..hi)).collect();
    BasicFunction::new(grid.clone(), values).unwrap()
}
