// SPDX-License-Identifier: MIT OR Apache-2.0

//! Hermitian matrix utilities shared by every module.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative Hermitian tolerance, measured against the largest entry magnitude.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative PSD tolerance, measured against the largest eigenvalue.
pub const PSD_TOL: f64 = 1e-10;

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// `(A + Aᴴ) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

pub fn is_hermitian(a: &CMatrix, rel_tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = max_abs(a);
    let n = a.nrows();
    for i in 0..n {
        for j in i..n {
            if (a[(i, j)] - a[(j, i)].conj()).norm() > rel_tol * scale {
                return false;
            }
        }
    }
    true
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn real_trace(a: &CMatrix) -> f64 {
    a.trace().re
}

/// Eigendecomposition of a Hermitian matrix, values sorted descending.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Unitary matrix whose columns are the eigenvectors.
    pub vectors: CMatrix,
    pub values: Vec<f64>,
}

impl EigenSystem {
    pub fn of_hermitian(a: &CMatrix) -> EigenSystem {
        let n = a.nrows();
        let eig = SymmetricEigen::new(hermitian_part(a));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = CMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        EigenSystem { vectors, values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `Φ · diag(f(λ)) · Φᴴ`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let scaled: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        self.recompose_with(&scaled)
    }

    pub fn recompose_with(&self, values: &[f64]) -> CMatrix {
        let mut left = self.vectors.clone();
        for (j, &v) in values.iter().enumerate() {
            left.column_mut(j).scale_mut(v);
        }
        hermitian_part(&(left * self.vectors.adjoint()))
    }

    pub fn recompose(&self) -> CMatrix {
        self.recompose_with(&self.values)
    }
}

/// Principal square root of a Hermitian PSD matrix; negative eigenvalues are floored at 0.
pub fn hermitian_sqrt(a: &CMatrix) -> CMatrix {
    EigenSystem::of_hermitian(a).map_values(|v| v.max(0.0).sqrt())
}

/// Cholesky factor of a Hermitian positive-definite matrix together with its log-determinant.
#[derive(Debug, Clone)]
pub struct PdFactor {
    chol: Cholesky<Complex64, Dyn>,
    log_det: f64,
}

impl PdFactor {
    pub fn new(a: &CMatrix) -> Result<PdFactor> {
        if !a.is_square() {
            return Err(Error::InvalidInput(format!(
                "expected a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let chol = Cholesky::new(hermitian_part(a)).ok_or_else(|| {
            Error::NumericalDomain("matrix is not positive definite".to_string())
        })?;
        let l = chol.l_dirty();
        let mut log_det = 0.0;
        for i in 0..l.nrows() {
            let d = l[(i, i)].re;
            if !(d.is_finite() && d > 0.0) || l[(i, i)].im.abs() > 1e-8 * d {
                return Err(Error::NumericalDomain(
                    "matrix is singular or not positive definite".to_string(),
                ));
            }
            log_det += 2.0 * d.ln();
        }
        Ok(PdFactor { chol, log_det })
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `A⁻¹ B`.
    pub fn solve(&self, b: &CMatrix) -> CMatrix {
        self.chol.solve(b)
    }

    /// `tr(A⁻¹ B)`, real part.
    pub fn trace_solve(&self, b: &CMatrix) -> f64 {
        real_trace(&self.solve(b))
    }

    /// `A⁻¹`, obtained from the factorization.
    pub fn inverse(&self) -> CMatrix {
        hermitian_part(&self.chol.inverse())
    }

    /// `xᴴ A⁻¹ x`.
    pub fn quad_form(&self, x: &CVector) -> f64 {
        let y = self.chol.solve(x);
        x.dotc(&y).re
    }
}

/// `xᴴ A x` for Hermitian `A`.
pub fn hermitian_quad_form(a: &CMatrix, x: &CVector) -> f64 {
    x.dotc(&(a * x)).re
}

/// Frobenius norm of `a - b`.
pub fn frobenius_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample_pd() -> CMatrix {
        CMatrix::from_row_slice(
            3,
            3,
            &[
                c(4.0, 0.0),
                c(1.0, 0.5),
                c(0.0, -0.3),
                c(1.0, -0.5),
                c(3.0, 0.0),
                c(0.2, 0.1),
                c(0.0, 0.3),
                c(0.2, -0.1),
                c(2.0, 0.0),
            ],
        )
    }

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let a = sample_pd();
        let e = EigenSystem::of_hermitian(&a);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let unit = e.vectors.adjoint() * &e.vectors;
        assert!(frobenius_distance(&unit, &identity(3)) < 1e-12);
        assert!(frobenius_distance(&e.recompose(), &a) < 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let a = sample_pd();
        let r = hermitian_sqrt(&a);
        assert!(is_hermitian(&r, 1e-12));
        assert!(frobenius_distance(&(&r * &r), &a) < 1e-12);
    }

    #[test]
    fn factor_log_det_and_solve() {
        let a = sample_pd();
        let f = PdFactor::new(&a).unwrap();
        let e = EigenSystem::of_hermitian(&a);
        let expected: f64 = e.values.iter().map(|v| v.ln()).sum();
        assert_abs_diff_eq!(f.log_det(), expected, epsilon = 1e-12);
        assert!(frobenius_distance(&(&a * f.inverse()), &identity(3)) < 1e-12);
        assert_abs_diff_eq!(f.trace_solve(&a), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn factor_rejects_singular() {
        let mut a = identity(2);
        a[(1, 1)] = c(0.0, 0.0);
        assert!(matches!(PdFactor::new(&a), Err(Error::NumericalDomain(_))));
        a[(1, 1)] = c(-1.0, 0.0);
        assert!(matches!(PdFactor::new(&a), Err(Error::NumericalDomain(_))));
    }
}
