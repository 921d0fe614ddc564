//! Small dense linear-algebra helpers shared by the filters and the harness.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn symmetrized(mut m: DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(&mut m);
    m
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrized(m.clone()))
        .eigenvalues
        .min()
}

/// True when `m` is symmetric to `1e-12` (scaled) and its smallest eigenvalue
/// is at least `-rel_tol * max(trace, tiny)`.
pub fn is_psd(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    if !m.is_square() || m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return false;
    }
    min_eigenvalue(m) >= -rel_tol * m.trace().abs().max(f64::MIN_POSITIVE)
}

/// Symmetric square root factor `L` with `L L^T = m` for a PSD `m`
/// (negative rounding-level eigenvalues are clamped to zero).
pub fn psd_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetrized(m.clone()));
    let tol = 1e-10 * m.trace().abs().max(f64::MIN_POSITIVE);
    if eig.eigenvalues.iter().any(|&l| l < -tol) {
        return Err(Error::numerical("covariance is not positive semidefinite"));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

pub fn expm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("matrix exponential of non-finite matrix"));
    }
    let e = m.exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("matrix exponential overflowed"));
    }
    Ok(e)
}

/// Exact zero-order discretization of `x' = A x + w`, `E[w w^T] = W delta(t)`,
/// over `dt` by Van Loan's augmented exponential.
///
/// Returns `(Phi, Qd)` with `Phi = exp(A dt)` and
/// `Qd = int_0^dt exp(A s) W exp(A^T s) ds`.
pub fn van_loan(
    a: &DMatrix<f64>,
    w: &DMatrix<f64>,
    dt: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let mut aug = DMatrix::<f64>::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&(-a * dt));
    aug.view_mut((0, n), (n, n)).copy_from(&(w * dt));
    aug.view_mut((n, n), (n, n))
        .copy_from(&(a.transpose() * dt));
    let e = expm(&aug)?;
    let phi = e.view((n, n), (n, n)).transpose();
    let qd = &phi * e.view((0, n), (n, n));
    Ok((phi, symmetrized(qd)))
}
