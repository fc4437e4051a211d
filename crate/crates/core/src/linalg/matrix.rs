use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{GameError, Result};

/// A dense real matrix with at least one row and one column.
///
/// Row-major vectors are the exchange format (see [`DenseMatrix::from_row_major`]);
/// storage is a column-major [`nalgebra::DMatrix`].
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        DenseMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "matrix dimensions must be positive");
        DenseMatrix(DMatrix::identity(n, n))
    }

    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(GameError::validation(format!(
                "matrix must have at least one row and column, got {rows}x{cols}"
            )));
        }
        if entries.len() != rows * cols {
            return Err(GameError::shape(
                format!("{} entries for a {rows}x{cols} matrix", rows * cols),
                format!("{} entries", entries.len()),
            ));
        }
        Ok(DenseMatrix(DMatrix::from_row_slice(rows, cols, &entries)))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
            return Err(GameError::shape(
                format!("{m} columns"),
                format!("{} columns in row {i}", r.len()),
            ));
        }
        Self::from_row_major(n, m, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        DenseMatrix(DMatrix::from_fn(rows, cols, f))
    }

    /// Wraps an nalgebra matrix. Fails on an empty matrix.
    pub fn from_nalgebra(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(GameError::validation("matrix must be non-empty"));
        }
        Ok(DenseMatrix(m))
    }

    /// Entries drawn i.i.d. from N(0, 1).
    pub fn random_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        // filled row by row so the draw order matches the row-major exchange format
        let entries: Vec<f64> = (0..rows * cols)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        Self::from_row_major(rows, cols, entries).expect("positive dimensions")
    }

    pub(crate) fn wrap(m: DMatrix<f64>) -> Self {
        debug_assert!(m.nrows() > 0 && m.ncols() > 0);
        DenseMatrix(m)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }

    pub fn as_nalgebra(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_nalgebra(self) -> DMatrix<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        DenseMatrix(self.0.transpose())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        match self.0.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => {
                // column-major position back to (row, col)
                let (r, c) = (k % self.rows(), k / self.rows());
                Err(GameError::validation(format!(
                    "{what} has a non-finite entry at ({r}, {c})"
                )))
            }
        }
    }

    pub fn ensure_shape(&self, rows: usize, cols: usize, what: &str) -> Result<()> {
        if self.shape() != (rows, cols) {
            return Err(GameError::shape(
                format!("{what} of shape {rows}x{cols}"),
                format!("{}x{}", self.rows(), self.cols()),
            ));
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    /// Frobenius inner product.
    pub fn inner(&self, other: &DenseMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Self {
        DenseMatrix(&self.0 - &other.0)
    }

    pub fn add(&self, other: &DenseMatrix) -> Self {
        DenseMatrix(&self.0 + &other.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        DenseMatrix(&self.0 * s)
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self> {
        if self.cols() != other.rows() {
            return Err(GameError::shape(
                format!("{} rows on the right operand", self.cols()),
                format!("{}", other.rows()),
            ));
        }
        Ok(DenseMatrix(&self.0 * &other.0))
    }

    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Self {
        DenseMatrix(self.0.map(f))
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<DenseMatrix> for DMatrix<f64> {
    fn from(m: DenseMatrix) -> Self {
        m.0
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}
