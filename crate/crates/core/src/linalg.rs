//! Dense matrices and vector helpers, sized for small ambient dimensions.
//!
//! Everything here is O(n^3) with pivoting and no blocking; n stays at 4 or
//! below in practice, so this beats pulling in a full linear algebra stack.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<F>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> F {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: F) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<F> {
        (0..self.rows).map(|i| self.at(i, j)).collect()
    }

    /// Copy with column `j` removed.
    pub fn drop_column(&self, j: usize) -> Matrix<F> {
        let mut out = Matrix::zeros(self.rows, self.cols - 1);
        for i in 0..self.rows {
            let mut jj = 0;
            for k in 0..self.cols {
                if k != j {
                    out.set(i, jj, self.at(i, k));
                    jj += 1;
                }
            }
        }
        out
    }

    /// Copy with row `i` removed.
    pub fn drop_row(&self, i: usize) -> Matrix<F> {
        let mut out = Matrix::zeros(self.rows - 1, self.cols);
        let mut ii = 0;
        for k in 0..self.rows {
            if k != i {
                for j in 0..self.cols {
                    out.set(ii, j, self.at(k, j));
                }
                ii += 1;
            }
        }
        out
    }

    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> F {
        assert_eq!(self.rows, self.cols, "determinant of non-square matrix");
        let n = self.rows;
        if n == 0 {
            return F::one();
        }
        if n == 1 {
            return self.at(0, 0);
        }
        if n == 2 {
            return self.at(0, 0) * self.at(1, 1) - self.at(0, 1) * self.at(1, 0);
        }
        let mut a = self.clone();
        let mut det = F::one();
        for k in 0..n {
            let mut pivot = k;
            for i in k + 1..n {
                if a.at(i, k).abs() > a.at(pivot, k).abs() {
                    pivot = i;
                }
            }
            if a.at(pivot, k) == F::zero() {
                return F::zero();
            }
            if pivot != k {
                for j in 0..n {
                    let tmp = a.at(k, j);
                    a.set(k, j, a.at(pivot, j));
                    a.set(pivot, j, tmp);
                }
                det = -det;
            }
            det = det * a.at(k, k);
            for i in k + 1..n {
                let factor = a.at(i, k) / a.at(k, k);
                for j in k..n {
                    let v = a.at(i, j) - factor * a.at(k, j);
                    a.set(i, j, v);
                }
            }
        }
        det
    }

    /// Solve `self * x = rhs` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, rhs: &[F]) -> Result<Vec<F>> {
        assert_eq!(self.rows, self.cols, "solve needs a square matrix");
        assert_eq!(self.rows, rhs.len(), "rhs length mismatch");
        let n = self.rows;
        let mut a = self.clone();
        let mut b = rhs.to_vec();
        let scale = self
            .data
            .iter()
            .fold(F::zero(), |acc, v| acc.max(v.abs()))
            .max(F::one());
        let tiny = scale * F::epsilon() * F::of(64.0);
        for k in 0..n {
            let mut pivot = k;
            for i in k + 1..n {
                if a.at(i, k).abs() > a.at(pivot, k).abs() {
                    pivot = i;
                }
            }
            if a.at(pivot, k).abs() < tiny {
                return Err(Error::SingularJacobian);
            }
            if pivot != k {
                for j in 0..n {
                    let tmp = a.at(k, j);
                    a.set(k, j, a.at(pivot, j));
                    a.set(pivot, j, tmp);
                }
                b.swap(k, pivot);
            }
            for i in k + 1..n {
                let factor = a.at(i, k) / a.at(k, k);
                for j in k..n {
                    let v = a.at(i, j) - factor * a.at(k, j);
                    a.set(i, j, v);
                }
                b[i] = b[i] - factor * b[k];
            }
        }
        let mut x = vec![F::zero(); n];
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..n {
                s = s - a.at(k, j) * x[j];
            }
            x[k] = s / a.at(k, k);
        }
        Ok(x)
    }

    /// Infinity-norm condition estimate via the explicit inverse.
    pub fn condition_inf(&self) -> Result<F> {
        let n = self.rows;
        let mut inv_cols = Vec::with_capacity(n);
        for k in 0..n {
            let mut e = vec![F::zero(); n];
            e[k] = F::one();
            inv_cols.push(self.solve(&e)?);
        }
        let norm_inf = |rows: &dyn Fn(usize, usize) -> F| -> F {
            (0..n)
                .map(|i| (0..n).fold(F::zero(), |acc, j| acc + rows(i, j).abs()))
                .fold(F::zero(), F::max)
        };
        let a = norm_inf(&|i, j| self.at(i, j));
        let b = norm_inf(&|i, j| inv_cols[j][i]);
        Ok(a * b)
    }
}

pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter()
        .zip(b)
        .fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm<F: Scalar>(a: &[F]) -> F {
    dot(a, a).sqrt()
}

pub fn scaled<F: Scalar>(a: &[F], s: F) -> Vec<F> {
    a.iter().map(|&x| x * s).collect()
}

pub fn add<F: Scalar>(a: &[F], b: &[F]) -> Vec<F> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn sub<F: Scalar>(a: &[F], b: &[F]) -> Vec<F> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}
