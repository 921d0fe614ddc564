//! Discrete-time robust Kalman filter.
//!
//! Prior moments are the total mean/variance over the parameter law of the
//! conditional (fixed-parameter) moments:
//!
//! ```text
//! mu-    = E[A] mu+
//! Sigma- = E[A Sigma+ A^T] + E[B Q B^T] + E[(A - E[A]) mu+ mu+^T (A - E[A])^T]
//! ```
//!
//! All expectations are quadrature sums over precomputed node matrices.

use nalgebra::{DMatrix, DVector};

use crate::chaos::{points_for_degree, QuadratureRule};
use crate::error::{Error, Result};
use crate::filter::Filter;
use crate::linalg;
use crate::system::{GaussianBelief, UncertainLinearSystem};

/// Precomputed quadrature pieces of the prior covariance.
#[derive(Debug, Clone)]
pub struct DtMomentTables {
    weights: Vec<f64>,
    a_nodes: Vec<DMatrix<f64>>,
    deviations: Vec<DMatrix<f64>>,
    a_mean: DMatrix<f64>,
    bqb_mean: DMatrix<f64>,
}

impl DtMomentTables {
    pub fn new(sys: &UncertainLinearSystem, rule: &QuadratureRule) -> Self {
        let a_nodes: Vec<DMatrix<f64>> = rule.nodes().iter().map(|d| sys.eval_a(d)).collect();
        let weights = rule.weights().to_vec();
        let mut a_mean = DMatrix::zeros(sys.state_dim(), sys.state_dim());
        for (a, w) in a_nodes.iter().zip(&weights) {
            a_mean += a * *w;
        }
        let deviations = a_nodes.iter().map(|a| a - &a_mean).collect();
        let bqb_mean = linalg::symmetrized(rule.expect(|d| sys.process_noise(d)));
        Self {
            weights,
            a_nodes,
            deviations,
            a_mean,
            bqb_mean,
        }
    }

    /// Tables under a rule exact for every integrand the propagation needs.
    pub fn for_system(sys: &UncertainLinearSystem) -> Result<Self> {
        let rule = QuadratureRule::build(sys.delta_dist(), default_points(sys))?;
        Ok(Self::new(sys, &rule))
    }

    pub fn a_mean(&self) -> &DMatrix<f64> {
        &self.a_mean
    }

    pub fn bqb_mean(&self) -> &DMatrix<f64> {
        &self.bqb_mean
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn a_nodes(&self) -> &[DMatrix<f64>] {
        &self.a_nodes
    }

    pub fn deviations(&self) -> &[DMatrix<f64>] {
        &self.deviations
    }

    /// `E[(A - E A) m m^T (A - E A)^T]`, the spread of the conditional prior mean.
    pub fn mean_spread(&self, mean: &DVector<f64>) -> DMatrix<f64> {
        let n = mean.len();
        let mut acc = DMatrix::zeros(n, n);
        for (d, w) in self.deviations.iter().zip(&self.weights) {
            let v = d * mean;
            acc += (&v * v.transpose()) * *w;
        }
        acc
    }

    /// `E[A S A^T]`.
    pub fn propagated_cov(&self, cov: &DMatrix<f64>) -> DMatrix<f64> {
        let n = cov.nrows();
        let mut acc = DMatrix::zeros(n, n);
        for (a, w) in self.a_nodes.iter().zip(&self.weights) {
            acc += (a * cov * a.transpose()) * *w;
        }
        acc
    }
}

fn default_points(sys: &UncertainLinearSystem) -> usize {
    let deg = 2 * sys
        .a_poly()
        .max_univariate_degree()
        .max(sys.b_poly().max_univariate_degree());
    points_for_degree(deg)
}

/// Total prior from a parameter-free posterior.
pub fn dt_propagate(tables: &DtMomentTables, posterior: &GaussianBelief) -> GaussianBelief {
    let mean = &tables.a_mean * &posterior.mean;
    let mut cov = tables.propagated_cov(&posterior.cov);
    cov += &tables.bqb_mean;
    cov += tables.mean_spread(&posterior.mean);
    linalg::symmetrize(&mut cov);
    GaussianBelief { mean, cov }
}

/// Measurement update with gain `K = S- C^T (C S- C^T + R)^{-1}` and
/// covariance `(I - K C) S-`, re-symmetrized.
pub fn kalman_update(
    prior: &GaussianBelief,
    y: &DVector<f64>,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<GaussianBelief> {
    let n = prior.dim();
    let pc_t = &prior.cov * c.transpose();
    let innov_cov = linalg::symmetrized(c * &pc_t + r);
    let chol = innov_cov
        .cholesky()
        .ok_or_else(|| Error::numerical("innovation covariance is not positive definite"))?;
    // K^T = S^{-1} C P
    let gain = chol.solve(&pc_t.transpose()).transpose();
    let innovation = y - c * &prior.mean;
    let mean = &prior.mean + &gain * innovation;
    let mut cov = (DMatrix::identity(n, n) - &gain * c) * &prior.cov;
    linalg::symmetrize(&mut cov);
    Ok(GaussianBelief { mean, cov })
}

/// Discrete robust filter over a fixed moment table.
#[derive(Debug, Clone)]
pub struct DtRobustFilter {
    tables: DtMomentTables,
    c: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl DtRobustFilter {
    pub fn new(sys: &UncertainLinearSystem) -> Result<Self> {
        Ok(Self {
            tables: DtMomentTables::for_system(sys)?,
            c: sys.c().clone(),
            r: sys.r().clone(),
        })
    }

    pub fn tables(&self) -> &DtMomentTables {
        &self.tables
    }
}

impl Filter for DtRobustFilter {
    fn predict(&self, posterior: &GaussianBelief) -> Result<GaussianBelief> {
        Ok(dt_propagate(&self.tables, posterior))
    }

    fn update(&self, prior: &GaussianBelief, y: &DVector<f64>) -> Result<GaussianBelief> {
        kalman_update(prior, y, &self.c, &self.r)
    }
}

/// Standard Kalman filter on the plant at the mean parameter.
#[derive(Debug, Clone)]
pub struct NominalDtFilter {
    a: DMatrix<f64>,
    bqb: DMatrix<f64>,
    c: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl NominalDtFilter {
    pub fn new(sys: &UncertainLinearSystem) -> Self {
        let mean = sys.delta_dist().mean();
        Self {
            a: sys.eval_a(&mean),
            bqb: sys.process_noise(&mean),
            c: sys.c().clone(),
            r: sys.r().clone(),
        }
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
}

impl Filter for NominalDtFilter {
    fn predict(&self, posterior: &GaussianBelief) -> Result<GaussianBelief> {
        let mean = &self.a * &posterior.mean;
        let cov = linalg::symmetrized(&self.a * &posterior.cov * self.a.transpose() + &self.bqb);
        Ok(GaussianBelief { mean, cov })
    }

    fn update(&self, prior: &GaussianBelief, y: &DVector<f64>) -> Result<GaussianBelief> {
        kalman_update(prior, y, &self.c, &self.r)
    }
}

/// One nominal predict + update step.
pub fn nominal_kf_step(
    filter: &NominalDtFilter,
    belief: &GaussianBelief,
    y: &DVector<f64>,
) -> Result<GaussianBelief> {
    filter.step(belief, y)
}
