//! Polynomial chaos building blocks: parameter laws, orthogonal bases,
//! quadratic bases for covariance expansions, and Gauss quadrature.

mod basis;
mod distribution;
pub mod poly;
mod quadrature;

use nalgebra::DMatrix;

pub use basis::{basis_var_matrix, build_basis, build_quadratic_basis, OrthoBasis, QuadraticBasis};
pub use distribution::{Family, Marginal, ParameterDistribution};
pub use poly::Polynomial;
pub use quadrature::{gauss_rule, points_for_degree, QuadNode, QuadratureRule};

use crate::error::Result;

/// Tensor Gauss rule with `points_per_dim` nodes in every dimension.
pub fn build_quadrature(
    dist: &ParameterDistribution,
    points_per_dim: usize,
) -> Result<QuadratureRule> {
    QuadratureRule::build(dist, points_per_dim)
}

/// `E[f(delta)]` under `rule`.
pub fn expect(rule: &QuadratureRule, f: impl Fn(&[f64]) -> DMatrix<f64>) -> DMatrix<f64> {
    rule.expect(f)
}
