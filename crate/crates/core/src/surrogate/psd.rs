//! Nearest positive semidefinite matrix.

use nalgebra::{DMatrix, SMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat10 = SMatrix<f64, 10, 10>;

const SYMMETRY_TOL: f64 = 1e-12;

/// Frobenius-nearest PSD matrix: symmetric eigendecomposition with negative
/// eigenvalues clamped to zero.
///
/// `m` must be symmetric to within `1e-12` relative to its largest entry.
pub fn project_psd(m: &Mat10) -> Result<Mat10> {
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > SYMMETRY_TOL * scale {
        return Err(Error::param("M", "matrix is not symmetric"));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0).ok_or(Error::EigenFailure)?;
    if eig.eigenvalues.iter().all(|&e| e >= 0.0) {
        return Ok(sym);
    }
    let clamped = eig.eigenvalues.map(|e| e.max(0.0));
    let v = &eig.eigenvectors;
    let r = v * Mat10::from_diagonal(&clamped) * v.transpose();
    Ok((r + r.transpose()) * 0.5)
}

pub fn min_eigenvalue(m: &Mat10) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// Lower-triangular `L` with `L Lᵀ = q` for a PSD (possibly singular) `q`.
///
/// With `q = V D Vᵀ` and `B = V √D`, a QR decomposition `Bᵀ = Q R` gives
/// `B Bᵀ = Rᵀ R`, so `L = Rᵀ`.
pub fn lower_factor(q: &Mat10) -> Result<Mat10> {
    let eig = SymmetricEigen::try_new((q + q.transpose()) * 0.5, f64::EPSILON, 0)
        .ok_or(Error::EigenFailure)?;
    let sqrt_d = eig.eigenvalues.map(|e| e.max(0.0).sqrt());
    let b = eig.eigenvectors * Mat10::from_diagonal(&sqrt_d);
    let bt = DMatrix::from_iterator(10, 10, b.transpose().iter().copied());
    let r = bt.qr().r();
    Ok(Mat10::from_iterator(r.transpose().iter().copied()))
}
