//! Envelope (skyline) Cholesky factorization for sparse SPD matrices.
//!
//! Row `i` of the factor is stored densely from its first structural nonzero
//! column up to the diagonal. Fill-in is confined to the envelope, which is
//! narrow for the element-ordered DG matrices assembled in this crate.

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    first_col: Vec<usize>,
    row_start: Vec<usize>,
    data: Vec<f64>,
}

/// Number of stored factor entries for the lower envelope of `a`.
pub fn envelope_size(a: &SparseMatrix) -> usize {
    (0..a.nrows())
        .map(|i| {
            let (cols, _) = a.row(i);
            let fc = cols.first().copied().unwrap_or(i).min(i);
            i - fc + 1
        })
        .sum()
}

impl EnvelopeCholesky {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "Cholesky needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let mut first_col = Vec::with_capacity(n);
        let mut row_start = Vec::with_capacity(n + 1);
        row_start.push(0);
        for i in 0..n {
            let (cols, _) = a.row(i);
            let fc = cols.first().copied().unwrap_or(i).min(i);
            first_col.push(fc);
            row_start.push(row_start[i] + (i - fc + 1));
        }
        let mut data = vec![0.0; row_start[n]];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    data[row_start[i] + j - first_col[i]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first_col[i];
            let ri = row_start[i];
            let a_ii = data[ri + i - fi];
            for j in fi..=i {
                let fj = first_col[j];
                let rj = row_start[j];
                let start = fi.max(fj);
                let mut s = data[ri + j - fi];
                for k in start..j {
                    s -= data[ri + k - fi] * data[rj + k - fj];
                }
                if j < i {
                    data[ri + j - fi] = s / data[rj + j - fj];
                } else {
                    if !(s > 1e-14 * a_ii.abs()) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                    }
                    data[ri + i - fi] = s.sqrt();
                }
            }
        }
        Ok(Self {
            n,
            first_col,
            row_start,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut y = b.to_vec();
        // L y = b
        for i in 0..self.n {
            let fi = self.first_col[i];
            let ri = self.row_start[i];
            let mut s = y[i];
            for k in fi..i {
                s -= self.data[ri + k - fi] * y[k];
            }
            y[i] = s / self.data[ri + i - fi];
        }
        // L^T x = y, column sweep over the stored rows
        for i in (0..self.n).rev() {
            let fi = self.first_col[i];
            let ri = self.row_start[i];
            y[i] /= self.data[ri + i - fi];
            let yi = y[i];
            for k in fi..i {
                y[k] -= self.data[ri + k - fi] * yi;
            }
        }
        y
    }
}
