//! Continuous-discrete (hybrid) robust Kalman filter.
//!
//! Between measurements the parameter is frozen, so the conditional moments
//! obey `mu' = A(d) mu` and `S' = A(d) S + S A(d)^T + B(d) Q B(d)^T`. The
//! conditional mean is expanded on the orthogonal basis `phi_0..phi_N` and
//! the conditional covariance on the quadratic basis `theta_0..theta_M`;
//! Galerkin projection turns both into deterministic linear ODEs for the
//! coefficient blocks, integrated here with fixed-step RK4. The total prior
//! is then rebuilt from the coefficients and updated like any Kalman prior.

use nalgebra::{DMatrix, DVector};

use crate::chaos::{
    basis_var_matrix, build_basis, build_quadratic_basis, points_for_degree, OrthoBasis,
    QuadraticBasis, QuadratureRule,
};
use crate::discrete::kalman_update;
use crate::error::{Error, Result};
use crate::filter::Filter;
use crate::linalg;
use crate::system::{GaussianBelief, UncertainLinearSystem};

/// Tolerance on the reconstructed prior: min eigenvalue >= -PSD_TOL * trace.
pub const PSD_TOL: f64 = 1e-8;

/// Stacked chaos coefficients of the conditional moments.
#[derive(Debug, Clone, PartialEq)]
pub struct PceState {
    /// `[mu_0; ..; mu_N]`, length `n (N + 1)`.
    pub mu_pc: DVector<f64>,
    /// `[Sigma_0; ..; Sigma_M]`, shape `n (M + 1) x n`.
    pub sigma_pc: DMatrix<f64>,
}

impl PceState {
    pub fn state_dim(&self) -> usize {
        self.sigma_pc.ncols()
    }

    pub fn mean_block(&self, i: usize) -> DVector<f64> {
        let n = self.state_dim();
        self.mu_pc.rows(i * n, n).into_owned()
    }

    pub fn cov_block(&self, i: usize) -> DMatrix<f64> {
        let n = self.state_dim();
        self.sigma_pc.rows(i * n, n).into_owned()
    }

    fn is_finite(&self) -> bool {
        self.mu_pc
            .iter()
            .chain(self.sigma_pc.iter())
            .all(|v| v.is_finite())
    }
}

/// Galerkin-projected operators of the coefficient ODEs.
#[derive(Debug, Clone)]
pub struct GalerkinOperators {
    n: usize,
    basis: OrthoBasis,
    qbasis: QuadraticBasis,
    /// Block `(i, j)` = `E[phi_i phi_j A] / h_i`.
    a_mu: DMatrix<f64>,
    /// Block `(i, j)` = `E[theta_i theta_j A]`, row-major over `(M+1)^2`.
    s_blocks: Vec<DMatrix<f64>>,
    g_theta: DMatrix<f64>,
    g_theta_inv: DMatrix<f64>,
    /// `T_i = E[theta_i B Q B^T]`.
    t_blocks: Vec<DMatrix<f64>>,
    phi_mean: DVector<f64>,
    theta_mean: DVector<f64>,
    var_phi: DMatrix<f64>,
    /// `(G_theta^{-1} (x) I_n)` applied to the `S` block rows, `n(M+1) x n(M+1)`.
    sigma_drift: DMatrix<f64>,
    /// `(G_theta^{-1} (x) I_n)` applied to the stacked `T_i`, `n(M+1) x n`.
    sigma_forcing: DMatrix<f64>,
}

impl GalerkinOperators {
    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> &OrthoBasis {
        &self.basis
    }

    pub fn quadratic_basis(&self) -> &QuadraticBasis {
        &self.qbasis
    }

    /// `N + 1`.
    pub fn mean_terms(&self) -> usize {
        self.basis.len()
    }

    /// `M + 1`.
    pub fn cov_terms(&self) -> usize {
        self.qbasis.len()
    }

    pub fn a_mu(&self) -> &DMatrix<f64> {
        &self.a_mu
    }

    pub fn a_mu_block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let n = self.n;
        self.a_mu.view((i * n, j * n), (n, n)).into_owned()
    }

    pub fn s_block(&self, i: usize, j: usize) -> &DMatrix<f64> {
        &self.s_blocks[i * self.cov_terms() + j]
    }

    pub fn t_block(&self, i: usize) -> &DMatrix<f64> {
        &self.t_blocks[i]
    }

    pub fn g_theta(&self) -> &DMatrix<f64> {
        &self.g_theta
    }

    pub fn g_theta_inv(&self) -> &DMatrix<f64> {
        &self.g_theta_inv
    }

    pub fn norms(&self) -> &[f64] {
        self.basis.norms()
    }

    pub fn phi_mean(&self) -> &DVector<f64> {
        &self.phi_mean
    }

    pub fn theta_mean(&self) -> &DVector<f64> {
        &self.theta_mean
    }

    pub fn var_phi(&self) -> &DMatrix<f64> {
        &self.var_phi
    }

    /// Coefficient-ODE right-hand side.
    pub fn derivative(&self, state: &PceState) -> PceState {
        let n = self.n;
        let mu_dot = &self.a_mu * &state.mu_pc;
        let z = &self.sigma_drift * &state.sigma_pc;
        let mut sigma_dot = self.sigma_forcing.clone();
        for i in 0..self.cov_terms() {
            let zi = z.rows(i * n, n);
            let mut out = sigma_dot.rows_mut(i * n, n);
            out += zi;
            out += zi.transpose();
        }
        PceState {
            mu_pc: mu_dot,
            sigma_pc: sigma_dot,
        }
    }

    /// Conditional mean `sum_i mu_i phi_i` at a standard-coordinate point.
    pub fn conditional_mean(&self, state: &PceState, xi: &[f64]) -> DVector<f64> {
        let phi = self.basis.eval_std(xi);
        let mut acc = DVector::zeros(self.n);
        for (i, p) in phi.iter().enumerate() {
            acc += state.mean_block(i) * *p;
        }
        acc
    }

    /// Conditional covariance `sum_i Sigma_i theta_i` at a standard-coordinate point.
    pub fn conditional_cov(&self, state: &PceState, xi: &[f64]) -> DMatrix<f64> {
        let theta = self.qbasis.eval_std(xi);
        let mut acc = DMatrix::zeros(self.n, self.n);
        for (i, t) in theta.iter().enumerate() {
            acc += state.cov_block(i) * *t;
        }
        acc
    }
}

/// Rule used by [`build_galerkin`] when none is supplied: exact for
/// `theta theta A`, `theta B Q B^T` and `phi phi A`.
pub fn galerkin_rule(sys: &UncertainLinearSystem, basis: &OrthoBasis) -> Result<QuadratureRule> {
    let q = 2 * basis.total_order();
    let ga = sys.a_poly().max_univariate_degree();
    let gb = sys.b_poly().max_univariate_degree();
    let deg = (2 * q + ga).max(q + 2 * gb);
    QuadratureRule::build(sys.delta_dist(), points_for_degree(deg))
}

pub fn build_galerkin(
    sys: &UncertainLinearSystem,
    basis: &OrthoBasis,
    qbasis: &QuadraticBasis,
    rule: &QuadratureRule,
) -> Result<GalerkinOperators> {
    let n = sys.state_dim();
    let k = basis.len();
    let l = qbasis.len();

    let mut a_mu = DMatrix::zeros(n * k, n * k);
    let mut s_blocks = vec![DMatrix::zeros(n, n); l * l];
    let mut t_blocks = vec![DMatrix::zeros(n, n); l];
    let mut g_theta = DMatrix::zeros(l, l);
    let mut phi_mean = DVector::zeros(k);
    let mut theta_mean = DVector::zeros(l);

    for q in rule.iter() {
        let a = sys.eval_a(q.param);
        let bqb = sys.process_noise(q.param);
        let phi = basis.eval_std(q.std);
        let theta = qbasis.eval_std(q.std);
        let w = q.weight;
        phi_mean.axpy(w, &phi, 1.0);
        theta_mean.axpy(w, &theta, 1.0);
        for i in 0..k {
            for j in 0..k {
                let c = w * phi[i] * phi[j];
                if c != 0.0 {
                    let mut blk = a_mu.view_mut((i * n, j * n), (n, n));
                    blk += &a * c;
                }
            }
        }
        for i in 0..l {
            t_blocks[i] += &bqb * (w * theta[i]);
            for j in 0..l {
                let c = w * theta[i] * theta[j];
                g_theta[(i, j)] += c;
                s_blocks[i * l + j] += &a * c;
            }
        }
    }
    for (i, h) in basis.norms().iter().enumerate() {
        let mut rows = a_mu.rows_mut(i * n, n);
        rows /= *h;
    }
    linalg::symmetrize(&mut g_theta);
    let g_theta_inv = g_theta
        .clone()
        .cholesky()
        .ok_or_else(|| Error::config("quadratic basis Gram matrix is not positive definite"))?
        .inverse();

    let mut sigma_drift = DMatrix::zeros(n * l, n * l);
    let mut sigma_forcing = DMatrix::zeros(n * l, n);
    for i in 0..l {
        for j in 0..l {
            let g = g_theta_inv[(i, j)];
            if g == 0.0 {
                continue;
            }
            for kk in 0..l {
                let mut blk = sigma_drift.view_mut((i * n, kk * n), (n, n));
                blk += &s_blocks[j * l + kk] * g;
            }
            let mut f = sigma_forcing.rows_mut(i * n, n);
            f += &t_blocks[j] * g;
        }
        let mut f = sigma_forcing.rows_mut(i * n, n);
        let sym = linalg::symmetrized(f.clone_owned());
        f.copy_from(&sym);
    }

    let var_phi = basis_var_matrix(basis, rule);
    Ok(GalerkinOperators {
        n,
        basis: basis.clone(),
        qbasis: qbasis.clone(),
        a_mu,
        s_blocks,
        g_theta,
        g_theta_inv,
        t_blocks,
        phi_mean,
        theta_mean,
        var_phi,
        sigma_drift,
        sigma_forcing,
    })
}

/// Basis of order `order`, its quadratic basis, and operators under the default rule.
pub fn galerkin_for_system(sys: &UncertainLinearSystem, order: u32) -> Result<GalerkinOperators> {
    let basis = build_basis(sys.delta_dist(), order)?;
    let qbasis = build_quadratic_basis(&basis)?;
    let rule = galerkin_rule(sys, &basis)?;
    build_galerkin(sys, &basis, &qbasis, &rule)
}

/// Projects a parameter-free posterior onto the bases: zeroth blocks carry it,
/// all others are zero.
pub fn lift(posterior: &GaussianBelief, mean_terms: usize, cov_terms: usize) -> PceState {
    let n = posterior.dim();
    let mut mu_pc = DVector::zeros(n * mean_terms);
    mu_pc.rows_mut(0, n).copy_from(&posterior.mean);
    let mut sigma_pc = DMatrix::zeros(n * cov_terms, n);
    sigma_pc
        .rows_mut(0, n)
        .copy_from(&linalg::symmetrized(posterior.cov.clone()));
    PceState { mu_pc, sigma_pc }
}

fn combine(base: &PceState, k: &PceState, h: f64) -> PceState {
    PceState {
        mu_pc: &base.mu_pc + &k.mu_pc * h,
        sigma_pc: &base.sigma_pc + &k.sigma_pc * h,
    }
}

/// Classical RK4 over `[0, dt]` in `substeps` equal steps.
pub fn integrate_pce(
    ops: &GalerkinOperators,
    state: &PceState,
    dt: f64,
    substeps: usize,
) -> Result<PceState> {
    if dt.is_nan() || dt <= 0.0 || substeps == 0 {
        return Err(Error::config(
            "integration needs dt > 0 and at least one substep",
        ));
    }
    let h = dt / substeps as f64;
    let mut x = state.clone();
    for step in 0..substeps {
        let k1 = ops.derivative(&x);
        let k2 = ops.derivative(&combine(&x, &k1, 0.5 * h));
        let k3 = ops.derivative(&combine(&x, &k2, 0.5 * h));
        let k4 = ops.derivative(&combine(&x, &k3, h));
        x.mu_pc += (k1.mu_pc + (k2.mu_pc + k3.mu_pc) * 2.0 + k4.mu_pc) * (h / 6.0);
        x.sigma_pc += (k1.sigma_pc + (k2.sigma_pc + k3.sigma_pc) * 2.0 + k4.sigma_pc) * (h / 6.0);
        if !x.is_finite() {
            return Err(Error::numerical(format!(
                "non-finite chaos coefficients at RK4 substep {}",
                step + 1
            )));
        }
    }
    Ok(x)
}

/// Total prior from conditional-moment coefficients:
/// `mu = sum_i E[phi_i] mu_i`,
/// `Sigma = sum_i E[theta_i] Sigma_i + sum_ij Var(Phi)_ij mu_i mu_j^T`.
pub fn reconstruct_prior(ops: &GalerkinOperators, state: &PceState) -> Result<GaussianBelief> {
    let n = ops.n;
    let mut mean = DVector::zeros(n);
    for (i, p) in ops.phi_mean.iter().enumerate() {
        if *p != 0.0 {
            mean += state.mean_block(i) * *p;
        }
    }
    let mut cov = DMatrix::zeros(n, n);
    for (i, t) in ops.theta_mean.iter().enumerate() {
        if *t != 0.0 {
            cov += state.cov_block(i) * *t;
        }
    }
    // mu_tilde Var(Phi) mu_tilde^T with mu_tilde = [mu_0 .. mu_N]
    let k = ops.mean_terms();
    let mu_tilde = DMatrix::from_fn(n, k, |r, c| state.mu_pc[c * n + r]);
    cov += &mu_tilde * &ops.var_phi * mu_tilde.transpose();
    linalg::symmetrize(&mut cov);

    if cov.iter().any(|v| !v.is_finite()) || mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("reconstructed prior is not finite"));
    }
    let lam = linalg::min_eigenvalue(&cov);
    if lam < -PSD_TOL * cov.trace().abs().max(f64::MIN_POSITIVE) {
        return Err(Error::numerical(format!(
            "reconstructed prior covariance is indefinite (min eigenvalue {lam:e}); \
             the chaos order is probably too low"
        )));
    }
    Ok(GaussianBelief { mean, cov })
}

/// lift -> integrate -> reconstruct -> Kalman update.
#[allow(clippy::too_many_arguments)]
pub fn cd_step(
    ops: &GalerkinOperators,
    posterior: &GaussianBelief,
    y: &DVector<f64>,
    dt: f64,
    substeps: usize,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<GaussianBelief> {
    let lifted = lift(posterior, ops.mean_terms(), ops.cov_terms());
    let propagated = integrate_pce(ops, &lifted, dt, substeps)?;
    let prior = reconstruct_prior(ops, &propagated)?;
    kalman_update(&prior, y, c, r)
}

/// Default RK4 substep count: `ceil(dt / 0.01)`.
pub fn default_substeps(dt: f64) -> usize {
    ((dt / 0.01) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

#[derive(Debug, Clone)]
pub struct CdRobustFilter {
    ops: GalerkinOperators,
    dt: f64,
    substeps: usize,
    c: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl CdRobustFilter {
    pub fn new(sys: &UncertainLinearSystem, order: u32, dt: f64, substeps: usize) -> Result<Self> {
        Ok(Self {
            ops: galerkin_for_system(sys, order)?,
            dt,
            substeps,
            c: sys.c().clone(),
            r: sys.r().clone(),
        })
    }

    pub fn operators(&self) -> &GalerkinOperators {
        &self.ops
    }
}

impl Filter for CdRobustFilter {
    fn predict(&self, posterior: &GaussianBelief) -> Result<GaussianBelief> {
        let lifted = lift(posterior, self.ops.mean_terms(), self.ops.cov_terms());
        let propagated = integrate_pce(&self.ops, &lifted, self.dt, self.substeps)?;
        reconstruct_prior(&self.ops, &propagated)
    }

    fn update(&self, prior: &GaussianBelief, y: &DVector<f64>) -> Result<GaussianBelief> {
        kalman_update(prior, y, &self.c, &self.r)
    }
}

/// Hybrid Kalman filter on the mean-parameter plant: RK4 on
/// `mu' = A mu`, `S' = A S + S A^T + B Q B^T`.
#[derive(Debug, Clone)]
pub struct NominalCdFilter {
    a: DMatrix<f64>,
    bqb: DMatrix<f64>,
    dt: f64,
    substeps: usize,
    c: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl NominalCdFilter {
    pub fn new(sys: &UncertainLinearSystem, dt: f64, substeps: usize) -> Self {
        let mean = sys.delta_dist().mean();
        Self {
            a: sys.eval_a(&mean),
            bqb: sys.process_noise(&mean),
            dt,
            substeps,
            c: sys.c().clone(),
            r: sys.r().clone(),
        }
    }
}

/// RK4 for the fixed-parameter moment ODEs.
pub fn propagate_lyapunov(
    a: &DMatrix<f64>,
    bqb: &DMatrix<f64>,
    belief: &GaussianBelief,
    dt: f64,
    substeps: usize,
) -> GaussianBelief {
    let h = dt / substeps as f64;
    let f_mu = |m: &DVector<f64>| a * m;
    let f_cov = |s: &DMatrix<f64>| {
        let as_ = a * s;
        &as_ + as_.transpose() + bqb
    };
    let mut mu = belief.mean.clone();
    let mut cov = belief.cov.clone();
    for _ in 0..substeps {
        let m1 = f_mu(&mu);
        let m2 = f_mu(&(&mu + &m1 * (0.5 * h)));
        let m3 = f_mu(&(&mu + &m2 * (0.5 * h)));
        let m4 = f_mu(&(&mu + &m3 * h));
        mu += (m1 + (m2 + m3) * 2.0 + m4) * (h / 6.0);
        let c1 = f_cov(&cov);
        let c2 = f_cov(&(&cov + &c1 * (0.5 * h)));
        let c3 = f_cov(&(&cov + &c2 * (0.5 * h)));
        let c4 = f_cov(&(&cov + &c3 * h));
        cov += (c1 + (c2 + c3) * 2.0 + c4) * (h / 6.0);
    }
    linalg::symmetrize(&mut cov);
    GaussianBelief { mean: mu, cov }
}

impl Filter for NominalCdFilter {
    fn predict(&self, posterior: &GaussianBelief) -> Result<GaussianBelief> {
        let prior = propagate_lyapunov(&self.a, &self.bqb, posterior, self.dt, self.substeps);
        if !prior.is_finite() {
            return Err(Error::numerical("nominal hybrid prediction is not finite"));
        }
        Ok(prior)
    }

    fn update(&self, prior: &GaussianBelief, y: &DVector<f64>) -> Result<GaussianBelief> {
        kalman_update(prior, y, &self.c, &self.r)
    }
}
