//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Eigenvalue floor below which a symmetric matrix is treated as singular.
pub const EIG_FLOOR: f64 = 1e-12;

/// Smallest eigenvalue of a symmetric matrix (the input is symmetrized
/// first so tiny asymmetries from accumulation do not perturb the check).
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Symmetric positive-definite square root via eigendecomposition.
///
/// The symmetric root (not Cholesky) keeps the map continuous in the input
/// matrix. Fails when the smallest eigenvalue is at or below [`EIG_FLOOR`].
pub fn sym_sqrt_pd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Input(format!(
            "covariance must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig <= EIG_FLOOR {
        return Err(Error::NotPositiveDefinite { min_eig });
    }
    let sqrt_vals = eig.eigenvalues.map(f64::sqrt);
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&sqrt_vals) * v.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 4.0]);
        let h = sym_sqrt_pd(&m).unwrap();
        let back = &h * &h;
        for (a, b) in back.iter().zip(m.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]);
        assert!(matches!(
            sym_sqrt_pd(&m),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }
}
