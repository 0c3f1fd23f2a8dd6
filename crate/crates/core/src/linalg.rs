//! Small dense helpers for the k×k systems that show up in the logrank
//! statistic. k is at most a handful, so everything is plain `Vec<f64>`.

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.dim + c]
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.dim + c] += v;
    }

    /// Leading `m`×`m` block.
    pub fn leading(&self, m: usize) -> SquareMatrix {
        let mut out = SquareMatrix::zeros(m);
        for r in 0..m {
            for c in 0..m {
                out.data[r * m + c] = self.get(r, c);
            }
        }
        out
    }

    pub fn add_diagonal(&mut self, v: f64) {
        for i in 0..self.dim {
            self.data[i * self.dim + i] += v;
        }
    }

    /// Solves `self * x = rhs` for a symmetric positive-definite matrix.
    ///
    /// A pivot that falls below `1e-12` times the largest diagonal entry is
    /// treated as singular.
    pub fn solve_spd(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim;
        assert_eq!(rhs.len(), n);
        let scale = (0..n).map(|i| self.get(i, i).abs()).fold(0.0_f64, f64::max);
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::SingularVariance);
        }
        let tol = 1e-12 * scale;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = self.get(j, j);
            for p in 0..j {
                d -= l[j * n + p] * l[j * n + p];
            }
            if !(d > tol) {
                return Err(Error::SingularVariance);
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for p in 0..j {
                    s -= l[i * n + p] * l[j * n + p];
                }
                l[i * n + j] = s / djj;
            }
        }
        let mut y = rhs.to_vec();
        for i in 0..n {
            for p in 0..i {
                y[i] -= l[i * n + p] * y[p];
            }
            y[i] /= l[i * n + i];
        }
        for i in (0..n).rev() {
            for p in (i + 1)..n {
                y[i] -= l[p * n + i] * y[p];
            }
            y[i] /= l[i * n + i];
        }
        Ok(y)
    }
}
