//! Symmetric-matrix helpers shared by the smoothing and sampling code.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Relative asymmetry tolerated before a matrix is rejected as non-symmetric.
const SYM_TOL: f64 = 1e-8;

pub fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotPositiveDefinite(format!("{what} is not square")));
    }
    let scale = m.amax().max(1e-300);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > SYM_TOL * scale {
                return Err(Error::NotPositiveDefinite(format!(
                    "{what} is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

/// Confirm that `m` is symmetric positive definite.
pub fn check_spd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    check_symmetric(m, what)?;
    let eig = m.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1e-300);
    if eig.eigenvalues.iter().any(|&l| l <= 1e-12 * scale) {
        return Err(Error::NotPositiveDefinite(format!(
            "{what} has a non-positive eigenvalue"
        )));
    }
    Ok(())
}

/// Symmetric square root via eigendecomposition.
///
/// Tolerates positive semi-definite input: eigenvalues in `[-tol, 0]` are
/// clamped to zero, anything more negative is an error.
pub fn sym_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(m, "matrix for square root")?;
    let eig = m.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1e-300);
    let tol = 1e-10 * scale;
    let mut roots = eig.eigenvalues.clone();
    for l in roots.iter_mut() {
        if *l < -tol {
            return Err(Error::NotPositiveDefinite(format!(
                "eigenvalue {l} below zero in square root"
            )));
        }
        *l = l.max(0.0).sqrt();
    }
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&roots) * q.transpose())
}

/// Correlation matrix from a covariance matrix.
pub fn correlation_from_covariance(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(cov, "covariance")?;
    let d = cov.nrows();
    let mut corr = DMatrix::zeros(d, d);
    for i in 0..d {
        if cov[(i, i)] <= 0.0 {
            return Err(Error::Degenerate(format!(
                "zero variance in coordinate {i}, correlation undefined"
            )));
        }
    }
    for i in 0..d {
        for j in 0..d {
            corr[(i, j)] = cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt();
        }
    }
    Ok(corr)
}
