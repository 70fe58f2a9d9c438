//! Minimal dense linear algebra for measurement matrices.

use crate::error::{ensure_dim, invalid, Error, Result};
use serde::{Deserialize, Serialize};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        ensure_dim(rows * cols, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("matrix", "entries must be finite"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// `(0 | I)`: selects the last `tail` of `head + tail` coordinates.
    pub fn tail_selector(head: usize, tail: usize) -> Self {
        Self::coordinate_selector(head + tail, &(head..head + tail).collect::<Vec<_>>())
    }

    /// Rows are unit vectors picking out `coords` of an `n`-vector.
    pub fn coordinate_selector(n: usize, coords: &[usize]) -> Self {
        let mut m = Self::zeros(coords.len(), n);
        for (r, &c) in coords.iter().enumerate() {
            m.data[r * n + c] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.cols, x.len())?;
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Aᵀ v`.
    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.rows, v.len())?;
        let mut out = vec![0.0; self.cols];
        for (r, &vr) in v.iter().enumerate() {
            for (c, o) in out.iter_mut().enumerate() {
                *o += self.get(r, c) * vr;
            }
        }
        Ok(out)
    }

    /// Largest singular value by power iteration on `AᵀA`.
    pub fn operator_norm(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        let mut v: Vec<f64> = (0..self.cols).map(|i| 1.0 + 0.1 * (i as f64 + 1.0).sin()).collect();
        let mut lambda = 0.0;
        for _ in 0..1000 {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            let av = self.apply_unchecked(&v);
            let w = self.apply_transpose(&av).expect("shape");
            let next: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
            v = w;
            if (next - lambda).abs() <= 1e-15 * next.abs().max(1e-300) {
                lambda = next;
                break;
            }
            lambda = next;
        }
        lambda.max(0.0).sqrt()
    }

    /// Errors unless `‖A‖ ≤ 1` (within `1e-9`).
    pub fn check_contraction(&self) -> Result<()> {
        let norm = self.operator_norm();
        if norm > 1.0 + 1e-9 {
            Err(Error::OperatorNorm { norm })
        } else {
            Ok(())
        }
    }
}

/// Cholesky factor `L` (row-major, lower) of a symmetric positive-definite matrix.
pub fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    ensure_dim(n * n, a.len())?;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(invalid("matrix", "not positive definite"));
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Solve `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    x
}
