//! Small dense row-major matrices, enough for the builtin computations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidParameter("ragged matrix rows".into()));
        }
        Ok(Matrix {
            rows: n,
            cols: m,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in diag.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self::diagonal(&vec![s; n])
    }

    /// Random orthogonal matrix via modified Gram-Schmidt on a Gaussian matrix.
    pub fn random_orthogonal(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
        while cols.len() < n {
            let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            // two passes keep the basis orthogonal to working precision
            for _ in 0..2 {
                for c in &cols {
                    let p: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(c).for_each(|(a, b)| *a -= p * b);
                }
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-8 {
                v.iter_mut().for_each(|a| *a /= norm);
                cols.push(v);
            }
        }
        let mut m = Self::zeros(n, n);
        for (j, c) in cols.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                m.data[i * n + j] = *v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn is_diagonal(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..self.cols).all(|j| i == j || self.data[i * self.cols + j] == 0.0))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.data
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `U diag(s) Vᵀ`; the spectral norm is `max |s_i|`.
    pub fn with_singular_values(singular: &[f64], seed: u64) -> Self {
        let n = singular.len();
        let u = Self::random_orthogonal(n, seed);
        let v =
            Self::random_orthogonal(n, seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1));
        let us = u.matmul(&Self::diagonal(singular)).expect("square");
        us.matmul(&v.transpose()).expect("square")
    }

    /// `U diag(λ) Uᵀ`, a symmetric matrix with the given eigenvalues.
    pub fn symmetric_with_eigenvalues(eigen: &[f64], seed: u64) -> Self {
        let u = Self::random_orthogonal(eigen.len(), seed);
        let ul = u.matmul(&Self::diagonal(eigen)).expect("square");
        let mut m = ul.matmul(&u.transpose()).expect("square");
        m.symmetrize();
        m
    }

    fn symmetrize(&mut self) {
        let n = self.rows;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg;
            }
        }
    }

    /// Spectral norm estimate via power iteration on `AᵀA`.
    ///
    /// Exact for diagonal matrices; otherwise converges from below.
    pub fn spectral_norm(&self) -> f64 {
        if self.is_diagonal() {
            return (0..self.rows)
                .map(|i| self.get(i, i).abs())
                .fold(0.0, f64::max);
        }
        let n = self.cols;
        if n == 0 {
            return 0.0;
        }
        let at = self.transpose();
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut sigma = 0.0;
        for _ in 0..2000 {
            let w = at.mul_vec(&self.mul_vec(&v));
            let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            let next = norm.sqrt();
            v = w.into_iter().map(|a| a / norm).collect();
            if (next - sigma).abs() <= 1e-15 * next {
                sigma = next;
                break;
            }
            sigma = next;
        }
        sigma
    }
}
