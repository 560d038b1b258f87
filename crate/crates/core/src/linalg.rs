//! Dense complex matrices for signals, channels and estimators.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// A dense `rows × cols` matrix of finite complex doubles.
///
/// Backed by `nalgebra::DMatrix` (column-major internally); row-major
/// constructors and accessors are provided for interchange.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "matrix dimensions must be positive");
        Self(DMatrix::identity(n, n))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Self(DMatrix::from_fn(rows, cols, f))
    }

    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Constraint(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "from_row_major",
                expected: format!("{} entries", rows * cols),
                found: format!("{} entries", entries.len()),
            });
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Constraint("matrix entries must be finite".into()));
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, &entries)))
    }

    pub fn from_nalgebra(inner: DMatrix<Complex64>) -> Self {
        Self(inner)
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

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn to_row_major(&self) -> Vec<Complex64> {
        self.0.transpose().as_slice().to_vec()
    }

    pub fn as_nalgebra(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_nalgebra(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(&self.0 * Complex64::new(factor, 0.0))
    }

    pub fn matmul(&self, rhs: &ComplexMatrix) -> Result<Self> {
        if self.cols() != rhs.rows() {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                expected: format!("{} rows on the right", self.cols()),
                found: format!("{}x{}", rhs.rows(), rhs.cols()),
            });
        }
        Ok(Self(&self.0 * &rhs.0))
    }

    pub fn add(&self, rhs: &ComplexMatrix) -> Result<Self> {
        self.check_same_shape(rhs, "add")?;
        Ok(Self(&self.0 + &rhs.0))
    }

    pub fn sub(&self, rhs: &ComplexMatrix) -> Result<Self> {
        self.check_same_shape(rhs, "sub")?;
        Ok(Self(&self.0 - &rhs.0))
    }

    fn check_same_shape(&self, rhs: &ComplexMatrix, op: &'static str) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(Error::DimensionMismatch {
                op,
                expected: format!("{}x{}", self.rows(), self.cols()),
                found: format!("{}x{}", rhs.rows(), rhs.cols()),
            });
        }
        Ok(())
    }

    /// `Σ |a_ij|²`.
    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `A · A^H`.
    pub fn gram(&self) -> Self {
        Self(&self.0 * self.0.adjoint())
    }

    /// Largest entrywise modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &ComplexMatrix) -> Result<f64> {
        self.check_same_shape(rhs, "max_abs_diff")?;
        Ok(self
            .0
            .iter()
            .zip(rhs.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Solves `self · X = rhs` for Hermitian positive-definite `self`.
    pub fn solve_hermitian_pd(&self, rhs: &ComplexMatrix) -> Result<Self> {
        if self.rows() != self.cols() || self.rows() != rhs.rows() {
            return Err(Error::DimensionMismatch {
                op: "solve_hermitian_pd",
                expected: format!("square system with {} rows", rhs.rows()),
                found: format!("{}x{}", self.rows(), self.cols()),
            });
        }
        let chol =
            self.0.clone().cholesky().ok_or_else(|| {
                Error::Internal("matrix is not Hermitian positive definite".into())
            })?;
        Ok(Self(chol.solve(&rhs.0)))
    }

    /// `ln det(self)` for Hermitian positive-definite `self`, via Cholesky.
    pub fn ln_det_hermitian_pd(&self) -> Result<f64> {
        if self.rows() != self.cols() {
            return Err(Error::DimensionMismatch {
                op: "ln_det_hermitian_pd",
                expected: "square matrix".into(),
                found: format!("{}x{}", self.rows(), self.cols()),
            });
        }
        let chol =
            self.0.clone().cholesky().ok_or_else(|| {
                Error::Internal("matrix is not Hermitian positive definite".into())
            })?;
        let l = chol.l_dirty();
        Ok(2.0 * (0..self.rows()).map(|i| l[(i, i)].re.ln()).sum::<f64>())
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        if self.rows() != self.cols() {
            return Err(Error::DimensionMismatch {
                op: "hermitian_eigenvalues",
                expected: "square matrix".into(),
                found: format!("{}x{}", self.rows(), self.cols()),
            });
        }
        let mut eig: Vec<f64> = self
            .0
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        eig.sort_by(f64::total_cmp);
        Ok(eig)
    }
}
