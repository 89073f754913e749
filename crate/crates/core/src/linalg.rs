//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const SYM_TOL: f64 = 1e-10;

pub fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotPositiveDefinite(format!(
            "matrix is {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYM_TOL * scale {
                return Err(Error::NotPositiveDefinite(format!(
                    "asymmetric entry ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

/// Symmetric eigendecomposition after symmetrizing away rounding noise.
pub fn sym_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let s = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(s)
}

/// Requires a strictly positive spectrum; returns the eigenvalues.
pub fn check_spd(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_symmetric(m)?;
    let eig = sym_eigen(m);
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || !min.is_finite() {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest eigenvalue {min:e}"
        )));
    }
    Ok(eig.eigenvalues)
}

/// Applies `f` to the spectrum of a symmetric matrix.
pub fn sym_apply(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = sym_eigen(m);
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(m, |x| x.max(0.0).sqrt())
}

pub fn sym_inv(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_spd(m)?;
    Ok(sym_apply(m, |x| 1.0 / x))
}

pub fn log_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    let ev = check_spd(m)?;
    Ok(ev.iter().map(|x| x.ln()).sum())
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigen(m).eigenvalues.min()
}

pub fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    nalgebra::Cholesky::new(m.clone())
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky failed".into()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Solves `m x = b` for a symmetric positive definite `m`.
pub fn spd_solve(m: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let chol = nalgebra::Cholesky::new(m.clone())
        .ok_or_else(|| Error::NotPositiveDefinite("Hessian is not positive definite".into()))?;
    let x = chol.solve(&DVector::from_column_slice(b));
    Ok(x.iter().copied().collect())
}

pub fn identity(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

pub fn is_identity(m: &DMatrix<f64>, tol: f64) -> bool {
    m.nrows() == m.ncols() && (m - DMatrix::identity(m.nrows(), m.ncols())).amax() <= tol
}

/// Block-diagonal matrix with `copies` repetitions of `block`.
pub fn block_diag(block: &DMatrix<f64>, copies: usize) -> DMatrix<f64> {
    let k = block.nrows();
    let mut out = DMatrix::zeros(k * copies, k * copies);
    for c in 0..copies {
        out.view_mut((c * k, c * k), (k, k)).copy_from(block);
    }
    out
}
