//! Small numerical utilities: composite Gauss–Legendre quadrature, Richardson
//! extrapolation tables and observed convergence orders.

use crate::error::{Error, Result};

const GL5_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
    0.236_926_885_056_189_08,
];

fn composite_gl5(f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        let mut panel = 0.0;
        for (x, w) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
            panel += w * f(mid + 0.5 * h * x);
        }
        total += 0.5 * h * panel;
    }
    total
}

/// Integrates `f` over `[a, b]`, doubling the panel count until two successive
/// composite 5-point Gauss–Legendre estimates agree to `rel_tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    let mut panels = 4;
    let mut prev = composite_gl5(&f, a, b, panels);
    while panels < 1 << 18 {
        panels *= 2;
        let next = composite_gl5(&f, a, b, panels);
        if (next - prev).abs() <= rel_tol * next.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Numerical(format!(
        "quadrature on [{a}, {b}] did not reach relative tolerance {rel_tol}"
    )))
}

/// Richardson table for a sequence sampled at step sizes `h_0 / 2^k`, assuming
/// an error expansion `c_1 h + c_2 h^2 + ...`. Entry `j` of the result is the
/// level-`j` extrapolant built from the `j + 1` finest samples.
pub fn richardson_levels(values: &[f64]) -> Vec<f64> {
    let mut levels = Vec::with_capacity(values.len());
    let mut row = values.to_vec();
    for j in 0..values.len() {
        if j > 0 {
            let factor = 2f64.powi(j as i32);
            row = row
                .windows(2)
                .map(|w| (factor * w[1] - w[0]) / (factor - 1.0))
                .collect();
        }
        levels.push(*row.last().unwrap());
    }
    levels
}

/// Observed order `log_ratio(e_coarse / e_fine)` for a refinement by `ratio`.
pub fn observed_order(e_coarse: f64, e_fine: f64, ratio: f64) -> f64 {
    (e_coarse / e_fine).ln() / ratio.ln()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}
