//! Dense factorizations backed by nalgebra, with ndarray at the boundary.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

pub(crate) fn to_na(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_na(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Solves `A x = b` for symmetric positive-definite `A`.
pub fn solve_spd(a: ArrayView2<'_, f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let chol = to_na(a)
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{}x{} system", a.nrows(), a.ncols())))?;
    let x = chol.solve(&DVector::from_iterator(b.len(), b.iter().copied()));
    Ok(Array1::from_iter(x.iter().copied()))
}

/// `A^{-1} B` for symmetric positive-definite `A`.
pub fn solve_spd_multi(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let chol = to_na(a)
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{}x{} system", a.nrows(), a.ncols())))?;
    Ok(from_na(&chol.solve(&to_na(b))))
}

/// Lower Cholesky factor of an SPD matrix.
pub fn cholesky_lower(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let chol = to_na(a)
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{}x{} covariance", a.nrows(), a.ncols())))?;
    Ok(from_na(&chol.l()))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: ArrayView2<'_, f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = to_na(a).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Largest eigenvalue of `XᵀX`, computed on whichever of `XᵀX` and `XXᵀ`
/// is smaller since both share their nonzero spectrum.
pub fn gram_spectral_norm(x: ArrayView2<'_, f64>) -> f64 {
    let gram = if x.nrows() < x.ncols() {
        x.dot(&x.t())
    } else {
        x.t().dot(&x)
    };
    symmetric_eigenvalues(gram.view())
        .last()
        .copied()
        .unwrap_or(0.0)
        .max(0.0)
}

/// Thin QR of a square matrix; returns the orthonormal factor.
pub(crate) fn qr_q(a: ArrayView2<'_, f64>) -> Array2<f64> {
    from_na(&to_na(a).qr().q())
}
