//! Independent reference computations used by the integration and acceptance
//! tests. Nothing here calls the library's own exponential, quadrature or
//! update code.
#![allow(dead_code)]

pub mod props;

use nalgebra::{DMatrix, DVector};

/// Matrix exponential by scaling and squaring of a 30-term Taylor series.
pub fn taylor_expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.iter().map(|v| v.abs()).sum::<f64>();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a * scale;
    let n = a.nrows();
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=30 {
        term = &term * &x / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `(Phi, Qd)` of `x' = A x + w`, `E[w w^T] = W`, over `dt`, from the
/// augmented exponential evaluated with [`taylor_expm`].
pub fn discretize(a: &DMatrix<f64>, w: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut aug = DMatrix::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&(-a * dt));
    aug.view_mut((0, n), (n, n)).copy_from(&(w * dt));
    aug.view_mut((n, n), (n, n))
        .copy_from(&(a.transpose() * dt));
    let e = taylor_expm(&aug);
    let phi = e.view((n, n), (n, n)).transpose();
    let qd = &phi * e.view((0, n), (n, n));
    let qd = (&qd + qd.transpose()) * 0.5;
    (phi, qd)
}

/// Textbook Kalman update with an explicit inverse.
pub fn reference_update(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    y: &DVector<f64>,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let s = c * cov * c.transpose() + r;
    let k = cov * c.transpose() * s.try_inverse().expect("invertible innovation covariance");
    let m = mean + &k * (y - c * mean);
    let n = mean.len();
    let p = (DMatrix::identity(n, n) - &k * c) * cov;
    let p = (&p + p.transpose()) * 0.5;
    (m, p)
}

/// Nominal linear Kalman filter with transition `phi` and process noise `qd`,
/// returning posterior means and covariances after each measurement.
pub fn reference_kf(
    phi: &DMatrix<f64>,
    qd: &DMatrix<f64>,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
    mean0: &DVector<f64>,
    cov0: &DMatrix<f64>,
    ys: &[DVector<f64>],
) -> Vec<(DVector<f64>, DMatrix<f64>)> {
    let mut m = mean0.clone();
    let mut p = cov0.clone();
    let mut out = Vec::with_capacity(ys.len());
    for y in ys {
        let mp = phi * &m;
        let pp = phi * &p * phi.transpose() + qd;
        let (mu, pu) = reference_update(&mp, &pp, y, c, r);
        m = mu;
        p = pu;
        out.push((m.clone(), p.clone()));
    }
    out
}

/// Small deterministic generator for oracle sampling (SplitMix64).
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }
}

pub fn min_eig(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigenvalues().min()
}
