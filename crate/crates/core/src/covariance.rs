// SPDX-License-Identifier: MIT OR Apache-2.0

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    frobenius_distance, hermitian_part, is_hermitian, max_abs, CMatrix, EigenSystem, HERMITIAN_TOL,
    PSD_TOL,
};

/// A Hermitian positive-semidefinite complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix(CMatrix);

impl CovarianceMatrix {
    /// Validates that `m` is Hermitian and PSD within tolerance, then stores its
    /// exactly-Hermitian part.
    pub fn new(m: CMatrix) -> Result<CovarianceMatrix> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "covariance must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("covariance has non-finite entries".into()));
        }
        if !is_hermitian(&m, HERMITIAN_TOL) {
            return Err(Error::NumericalDomain("covariance is not Hermitian".into()));
        }
        let h = hermitian_part(&m);
        let eig = EigenSystem::of_hermitian(&h);
        if eig.min() < -PSD_TOL * eig.max().abs().max(f64::MIN_POSITIVE) {
            return Err(Error::NumericalDomain(format!(
                "covariance is not positive semidefinite (min eigenvalue {:e})",
                eig.min()
            )));
        }
        Ok(CovarianceMatrix(h))
    }

    /// Callers guarantee the matrix is Hermitian PSD by construction.
    pub(crate) fn from_trusted(m: CMatrix) -> CovarianceMatrix {
        debug_assert!(m.is_square());
        CovarianceMatrix(hermitian_part(&m))
    }

    /// Rebuilds from an eigensystem after flooring eigenvalues at zero.
    pub(crate) fn from_eigen_floored(eig: &EigenSystem) -> CovarianceMatrix {
        CovarianceMatrix(eig.map_values(|v| v.max(0.0)))
    }

    pub fn identity(dim: usize) -> CovarianceMatrix {
        CovarianceMatrix(CMatrix::identity(dim, dim))
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Result<CovarianceMatrix> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::InvalidInput(format!("scale must be finite and >= 0, got {scale}")));
        }
        Ok(CovarianceMatrix(CMatrix::identity(dim, dim).scale(scale)))
    }

    pub fn zeros(dim: usize) -> CovarianceMatrix {
        CovarianceMatrix(CMatrix::zeros(dim, dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<CovarianceMatrix> {
        let n = diag.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        CovarianceMatrix::new(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn eigen(&self) -> EigenSystem {
        EigenSystem::of_hermitian(&self.0)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// True when the two matrices differ by at most `rel_tol` of the larger entry magnitude.
    pub fn approx_eq(&self, other: &CovarianceMatrix, rel_tol: f64) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        let scale = max_abs(&self.0).max(max_abs(&other.0)).max(f64::MIN_POSITIVE);
        frobenius_distance(&self.0, &other.0) <= rel_tol * scale
    }
}

impl AsRef<CMatrix> for CovarianceMatrix {
    fn as_ref(&self) -> &CMatrix {
        &self.0
    }
}
