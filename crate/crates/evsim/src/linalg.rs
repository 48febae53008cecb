//! Minimal dense linear algebra for the small SPD systems the bandits need.
//!
//! Dimensions are tiny (d <= ~12), so everything is a plain row-major
//! `Vec<f64>` and systems are solved through an explicit Cholesky
//! factorization. No caching of inverses; callers solve on demand.

use serde::{Deserialize, Serialize};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n_cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n_cols + c] = v;
    }

    /// `self += scale * u * v^T`.
    pub fn add_outer(&mut self, u: &[f64], v: &[f64], scale: f64) {
        debug_assert_eq!(u.len(), self.n_rows);
        debug_assert_eq!(v.len(), self.n_cols);
        for (r, &ur) in u.iter().enumerate() {
            let row = &mut self.data[r * self.n_cols..(r + 1) * self.n_cols];
            for (c, &vc) in v.iter().enumerate() {
                row[c] += scale * ur * vc;
            }
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += *b;
        }
    }

    pub fn sub_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a -= *b;
        }
    }

    /// Matrix-vector product `self * v`.
    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n_cols);
        let mut out = vec![0.0; self.n_rows];
        for r in 0..self.n_rows {
            let row = &self.data[r * self.n_cols..(r + 1) * self.n_cols];
            out[r] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Transposed matrix-vector product `self^T * v`.
    pub fn mat_tvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n_rows);
        let mut out = vec![0.0; self.n_cols];
        for r in 0..self.n_rows {
            let row = &self.data[r * self.n_cols..(r + 1) * self.n_cols];
            for (c, &rc) in row.iter().enumerate() {
                out[c] += rc * v[r];
            }
        }
        out
    }

    /// `self * other`.
    pub fn mat_mul(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.n_cols, other.n_rows);
        let mut out = Matrix::zeros(self.n_rows, other.n_cols);
        for r in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.n_cols {
                    out.data[r * out.n_cols + c] += a * other.get(k, c);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.n_cols, self.n_rows);
        for r in 0..self.n_rows {
            for c in 0..self.n_cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }
}

/// Cholesky factor (lower triangular) of an SPD matrix.
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

/// Factorizes an SPD matrix. Returns `None` if the matrix is not positive
/// definite (a pivot fails to stay strictly positive).
pub fn cholesky(m: &Matrix) -> Option<Cholesky> {
    assert_eq!(m.n_rows, m.n_cols);
    let n = m.n_rows;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m.get(i, j);
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(Cholesky { n, lower: l })
}

impl Cholesky {
    /// Solves `A x = b` given the factorization of `A`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let l = &self.lower;
        // forward: L y = b
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut sum = b[i];
            for k in 0..i {
                sum -= l[i * n + k] * y[k];
            }
            y[i] = sum / l[i * n + i];
        }
        // backward: L^T x = y
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in (i + 1)..n {
                sum -= l[k * n + i] * x[k];
            }
            x[i] = sum / l[i * n + i];
        }
        x
    }
}

/// Convenience: solves `A x = b` for SPD `A`.
pub fn spd_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    cholesky(a).map(|f| f.solve(b))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve_is_rhs() {
        let a = Matrix::identity(3);
        let x = spd_solve(&a, &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn solve_matches_hand_computation() {
        // A = [[2,0],[0,1]], b = [1,0] -> x = [0.5, 0]
        let mut a = Matrix::identity(2);
        a.add_outer(&[1.0, 0.0], &[1.0, 0.0], 1.0);
        let x = spd_solve(&a, &[1.0, 0.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12);
        assert!(x[1].abs() < 1e-12);
    }

    #[test]
    fn non_spd_rejected() {
        let mut a = Matrix::zeros(2, 2);
        a.set(0, 0, -1.0);
        a.set(1, 1, 1.0);
        assert!(cholesky(&a).is_none());
    }
}
