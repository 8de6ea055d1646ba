//! Dense row-major matrix of `f64`.
//!
//! Every adjacency, feature, weight, and gradient in this crate is a
//! `Matrix`. Graphs in scope are small (n <= 160 nodes), so a dense
//! representation with cache-friendly loops is sufficient.

use crate::error::{Error, Result};

/// Dense 2-D array of `f64`, stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl std::fmt::Debug for Matrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for c in 0..self.cols.min(8) {
                write!(f, "{:10.4} ", self[(r, c)])?;
            }
            writeln!(f, "{}", if self.cols > 8 { "..." } else { "" })?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    /// All-zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Matrix filled with a constant.
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Build from a flat row-major buffer; `data.len()` must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Parameter(format!(
                "matrix data length {} does not match shape {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Build from row slices; all rows must have equal length.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Standard matrix product; `self.cols` must equal `other.rows`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dimension(
                "matmul",
                self.shape_string(),
                other.shape_string(),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        // i-k-j order: streams over rows of `other`.
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Entrywise sum.
    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with("add", other, |a, b| a + b)
    }

    /// Entrywise difference.
    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with("sub", other, |a, b| a - b)
    }

    /// Entrywise product.
    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with("hadamard", other, |a, b| a * b)
    }

    fn zip_with(&self, op: &'static str, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::dimension(op, self.shape_string(), other.shape_string()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Multiply every entry by `c`.
    pub fn scale(&self, c: f64) -> Matrix {
        self.map(|x| x * c)
    }

    /// Apply `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Square root of the sum of squared entries.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }

    /// Sum of all entries.
    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// True when every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest row sum of absolute values; an upper bound on the spectral radius.
    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Symmetric within `tol` in absolute terms.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        for r in 0..self.rows {
            for c in (r + 1)..self.cols {
                if (self[(r, c)] - self[(c, r)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity_is_noop() {
        let m = Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[7.0, 8.0, 9.0]]);
        let i = Matrix::identity(3);
        assert_eq!(i.matmul(&m).unwrap(), m);
        assert_eq!(m.matmul(&i).unwrap(), m);
    }

    #[test]
    fn matmul_hand_checked_2x2() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = Matrix::from_rows(&[&[0.0], &[1.0]]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c, Matrix::from_rows(&[&[2.0], &[4.0]]));
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3"), "message should carry shapes: {msg}");
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let mut rng = crate::linalg::Rng::new(42);
        let a = rng.uniform_matrix(5, 7, -1.0, 1.0).unwrap();
        let b = rng.uniform_matrix(7, 3, -1.0, 1.0).unwrap();
        let fast = a.matmul(&b).unwrap();
        for i in 0..5 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..7 {
                    acc += a[(i, k)] * b[(k, j)];
                }
                assert!((fast[(i, j)] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn frobenius_norm_cases() {
        assert_eq!(Matrix::zeros(3, 2).frobenius_norm(), 0.0);
        assert_eq!(Matrix::from_rows(&[&[3.0, 4.0]]).frobenius_norm(), 5.0);
        let mut rng = crate::linalg::Rng::new(9);
        let m = rng.uniform_matrix(4, 4, -2.0, 2.0).unwrap();
        let by_loop: f64 = m.data().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((m.frobenius_norm() - by_loop).abs() < 1e-12);
    }

    #[test]
    fn transpose_roundtrip() {
        let mut rng = crate::linalg::Rng::new(1);
        let m = rng.uniform_matrix(3, 5, 0.0, 1.0).unwrap();
        assert_eq!(m.transpose().transpose(), m);
    }
}
