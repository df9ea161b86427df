//! Shape-preserving cubic Hermite interpolation (Fritsch–Carlson) with exact
//! derivative and antiderivative evaluation.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
    /// Cumulative integral from `xs[0]` to `xs[k]`.
    cumulative: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidArgument("sample arrays differ in length".into()));
        }
        if xs.len() < 2 {
            return Err(Error::InvalidArgument("need at least two samples".into()));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("sample abscissae must be strictly increasing".into()));
        }
        let n = xs.len();
        let secants: Vec<f64> = (0..n - 1)
            .map(|k| (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]))
            .collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for k in 1..n - 1 {
            slopes[k] = if secants[k - 1] * secants[k] <= 0.0 {
                0.0
            } else {
                (secants[k - 1] + secants[k]) / 2.0
            };
        }
        for k in 0..n - 1 {
            if secants[k] == 0.0 {
                slopes[k] = 0.0;
                slopes[k + 1] = 0.0;
                continue;
            }
            let a = slopes[k] / secants[k];
            let b = slopes[k + 1] / secants[k];
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                slopes[k] = tau * a * secants[k];
                slopes[k + 1] = tau * b * secants[k];
            }
        }
        let mut out = Self { xs, ys, slopes, cumulative: vec![0.0; n] };
        for k in 1..n {
            let h = out.xs[k] - out.xs[k - 1];
            out.cumulative[k] = out.cumulative[k - 1] + out.segment_integral(k - 1, h);
        }
        Ok(out)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    fn segment(&self, x: f64) -> usize {
        match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            k if k >= self.xs.len() => self.xs.len() - 2,
            k => k - 1,
        }
    }

    // Hermite basis on [x_k, x_k + h], local coordinate s = x - x_k.
    fn segment_eval(&self, k: usize, s: f64) -> (f64, f64) {
        let h = self.xs[k + 1] - self.xs[k];
        let u = s / h;
        let (y0, y1, d0, d1) = (self.ys[k], self.ys[k + 1], self.slopes[k], self.slopes[k + 1]);
        let h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
        let h10 = u * (1.0 - u) * (1.0 - u);
        let h01 = u * u * (3.0 - 2.0 * u);
        let h11 = u * u * (u - 1.0);
        let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let dh00 = 6.0 * u * (u - 1.0) / h;
        let dh10 = (1.0 - u) * (1.0 - 3.0 * u);
        let dh01 = -dh00;
        let dh11 = u * (3.0 * u - 2.0);
        let deriv = dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
        (value, deriv)
    }

    // Exact integral of the cubic on [x_k, x_k + s].
    fn segment_integral(&self, k: usize, s: f64) -> f64 {
        let h = self.xs[k + 1] - self.xs[k];
        let u = s / h;
        let (y0, y1, d0, d1) = (self.ys[k], self.ys[k + 1], self.slopes[k], self.slopes[k + 1]);
        let u2 = u * u;
        let u3 = u2 * u;
        let u4 = u3 * u;
        let i00 = u - u3 + u4 / 2.0;
        let i10 = u2 / 2.0 - 2.0 * u3 / 3.0 + u4 / 4.0;
        let i01 = u3 - u4 / 2.0;
        let i11 = u4 / 4.0 - u3 / 3.0;
        h * (i00 * y0 + i10 * h * d0 + i01 * y1 + i11 * h * d1)
    }

    /// Value at `x`; outside the sample range the end segments are extended.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.segment(x);
        self.segment_eval(k, x - self.xs[k]).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let k = self.segment(x);
        self.segment_eval(k, x - self.xs[k]).1
    }

    /// Integral of the interpolant from the first sample to `x` (clamped to the sample range).
    pub fn integral_to(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        let x = x.clamp(lo, hi);
        let k = self.segment(x);
        self.cumulative[k] + self.segment_integral(k, x - self.xs[k])
    }

    pub fn total_integral(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_samples_and_linear_data() {
        let xs: Vec<f64> = (0..6).map(|k| k as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let c = MonotoneCubic::new(xs, ys).unwrap();
        for x in [0.0, 0.3, 1.1, 2.5] {
            assert!((c.eval(x) - (2.0 * x + 1.0)).abs() < 1e-14);
            assert!((c.derivative(x) - 2.0).abs() < 1e-13);
        }
        // ∫_0^2.5 (2x+1) = 6.25 + 2.5
        assert!((c.total_integral() - 8.75).abs() < 1e-13);
        assert!((c.integral_to(1.0) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn antiderivative_matches_finite_difference() {
        let xs: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (3.0 * x).sin() + 2.0).collect();
        let c = MonotoneCubic::new(xs, ys).unwrap();
        let h = 1e-5;
        for x in [0.15, 0.77, 1.42] {
            let fd = (c.integral_to(x + h) - c.integral_to(x - h)) / (2.0 * h);
            assert!((fd - c.eval(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn no_overshoot_on_step_data() {
        let c = MonotoneCubic::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 1.0, 5.0, 5.0]).unwrap();
        for k in 0..=300 {
            let v = c.eval(k as f64 / 100.0);
            assert!(v >= 1.0 - 1e-12 && v <= 5.0 + 1e-12);
        }
    }

    #[test]
    fn rejects_unsorted_samples() {
        assert!(MonotoneCubic::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }
}
