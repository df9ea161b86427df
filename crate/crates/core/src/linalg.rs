//! Sparse symmetric positive-definite solves in skyline (variable band) storage.

use crate::basic::QuotientGrid;
use crate::error::{Error, Result};

/// Cholesky factor `L` of a symmetric positive-definite matrix, stored row by
/// row from the first nonzero column up to the diagonal.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    first: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl SkylineCholesky {
    /// Factors the matrix given by `(i, j, value)` triplets; entries with
    /// `j > i` are mirrored, duplicates are summed.
    pub fn factor(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut first: Vec<usize> = (0..n).collect();
        for &(i, j, _) in entries {
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            if r >= n {
                return Err(Error::InvalidArgument(format!("entry ({i}, {j}) outside a {n}x{n} matrix")));
            }
            first[r] = first[r].min(c);
        }
        let mut rows: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; i - first[i] + 1]).collect();
        for &(i, j, v) in entries {
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            rows[r][c - first[r]] += v;
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let start = fi.max(fj);
                let mut s = rows[i][j - fi];
                for k in start..j {
                    s -= rows[i][k - fi] * rows[j][k - fj];
                }
                if j < i {
                    rows[i][j - fi] = s / rows[j][j - fj];
                } else {
                    if !(s > 0.0) {
                        return Err(Error::Numerical(format!("matrix is not positive definite at row {i}")));
                    }
                    rows[i][i - fi] = s.sqrt();
                }
            }
        }
        Ok(Self { first, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = b.to_vec();
        for i in 0..n {
            let fi = self.first[i];
            let mut s = y[i];
            for k in fi..i {
                s -= self.rows[i][k - fi] * y[k];
            }
            y[i] = s / self.rows[i][i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            y[i] /= self.rows[i][i - fi];
            let yi = y[i];
            for k in fi..i {
                y[k] -= self.rows[i][k - fi] * yi;
            }
        }
        y
    }
}

/// Triplets of the weighted H¹ Gram matrix `diag(w) + Dᵀ diag(w) D`.
pub fn sobolev_gram_entries(grid: &QuotientGrid) -> Vec<(usize, usize, f64)> {
    let w = grid.weights();
    let mut out = Vec::with_capacity(grid.len() * 10);
    for (k, &wk) in w.iter().enumerate() {
        out.push((k, k, wk));
        if wk == 0.0 {
            continue;
        }
        let row = grid.derivative_row(k);
        for &(a, da) in &row {
            for &(b, db) in &row {
                if a >= b {
                    out.push((a, b, wk * da * db));
                }
            }
        }
    }
    out
}

/// The Gram matrix of the weighted H¹ inner product, factored.
pub fn sobolev_gram(grid: &QuotientGrid) -> Result<SkylineCholesky> {
    SkylineCholesky::factor(grid.len(), &sobolev_gram_entries(grid))
}

/// `⟨u, v⟩ = Σ w_i (u_i v_i + u'_i v'_i)`.
pub fn sobolev_inner(grid: &QuotientGrid, u: &[f64], v: &[f64]) -> f64 {
    let du = grid.derivative_of(u);
    let dv = grid.derivative_of(v);
    grid.weights().iter().enumerate().map(|(i, w)| w * (u[i] * v[i] + du[i] * dv[i])).sum()
}
