//! Orthogonal polynomial bases and the quadratic basis built from their products.

use log::warn;
use nalgebra::{DMatrix, DVector};

use super::distribution::{Family, ParameterDistribution};
use super::poly::{dictionary_size, graded_indices, MultiIndex, Polynomial};
use super::quadrature::{points_for_degree, QuadratureRule};
use crate::error::{Error, Result};

/// Monomial coefficients (ascending powers) of the degree-`k` member of `family`.
fn univariate_coeffs(family: Family, k: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if k == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 1.0];
    for j in 1..k {
        let jf = j as f64;
        let mut next = vec![0.0; j + 2];
        for (p, c) in cur.iter().enumerate() {
            next[p + 1] += c;
        }
        match family {
            // (j+1) P_{j+1} = (2j+1) x P_j - j P_{j-1}
            Family::Legendre => {
                next.iter_mut()
                    .for_each(|c| *c *= (2.0 * jf + 1.0) / (jf + 1.0));
                for (p, c) in prev.iter().enumerate() {
                    next[p] -= jf / (jf + 1.0) * c;
                }
            }
            // He_{j+1} = x He_j - j He_{j-1}
            Family::Hermite => {
                for (p, c) in prev.iter().enumerate() {
                    next[p] -= jf * c;
                }
            }
        }
        prev = cur;
        cur = next;
    }
    cur
}

fn univariate_norm(family: Family, k: usize) -> f64 {
    match family {
        Family::Legendre => 1.0 / (2.0 * k as f64 + 1.0),
        Family::Hermite => (1..=k).map(|j| j as f64).product(),
    }
}

/// Embeds a univariate coefficient list as a polynomial in variable `var` of `dims`.
fn embed(coeffs: &[f64], dims: usize, var: usize) -> Polynomial {
    let mut acc = Polynomial::zero(dims);
    for (p, &c) in coeffs.iter().enumerate() {
        if c != 0.0 {
            let mut exps = vec![0; dims];
            exps[var] = p as u32;
            acc = acc.add(&Polynomial::monomial(&exps, c));
        }
    }
    acc
}

/// Total-degree truncated tensor basis `phi_0 .. phi_N`, orthogonal under the
/// parameter law, expressed in the standard variables `xi`.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    distribution: ParameterDistribution,
    total_order: u32,
    multi_indices: Vec<MultiIndex>,
    functions: Vec<Polynomial>,
    norms: Vec<f64>,
}

impl OrthoBasis {
    pub fn distribution(&self) -> &ParameterDistribution {
        &self.distribution
    }

    pub fn total_order(&self) -> u32 {
        self.total_order
    }

    /// Number of basis functions, `N + 1`.
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn multi_indices(&self) -> &[MultiIndex] {
        &self.multi_indices
    }

    pub fn functions(&self) -> &[Polynomial] {
        &self.functions
    }

    /// `h_i = E[phi_i^2]`.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// `Phi(xi)` at a standard-coordinate point.
    pub fn eval_std(&self, xi: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.functions.iter().map(|f| f.eval(xi)))
    }

    /// `Phi(delta)` at a parameter-space point.
    ///
    /// For zero-scale (point mass) dimensions the standard coordinate is 0.
    pub fn eval(&self, delta: &[f64]) -> DVector<f64> {
        self.eval_std(&self.distribution.to_standard(delta))
    }

    /// `E[Phi Phi^T]` under `rule`.
    pub fn gram(&self, rule: &QuadratureRule) -> DMatrix<f64> {
        rule.expect_with(|q| {
            let p = self.eval_std(q.std);
            &p * p.transpose()
        })
    }
}

/// Orthogonal basis of total order `total_order`: Legendre for uniform (and
/// point-mass) dimensions, probabilists' Hermite for Gaussian dimensions.
/// Functions are not normalized; `h_i` is carried alongside.
pub fn build_basis(dist: &ParameterDistribution, total_order: u32) -> Result<OrthoBasis> {
    let dims = dist.dims();
    let multi_indices = graded_indices(dims, total_order);
    debug_assert_eq!(multi_indices.len(), dictionary_size(dims, total_order));
    let families: Vec<Family> = dist.marginals().iter().map(|m| m.family()).collect();

    let mut functions = Vec::with_capacity(multi_indices.len());
    let mut norms = Vec::with_capacity(multi_indices.len());
    for alpha in &multi_indices {
        let mut f = Polynomial::constant(dims, 1.0);
        let mut h = 1.0;
        for (k, &a) in alpha.iter().enumerate() {
            if a > 0 {
                f = f.mul(&embed(&univariate_coeffs(families[k], a as usize), dims, k));
            }
            h *= univariate_norm(families[k], a as usize);
        }
        functions.push(f);
        norms.push(h);
    }
    Ok(OrthoBasis {
        distribution: dist.clone(),
        total_order,
        multi_indices,
        functions,
        norms,
    })
}

/// `Var(Phi) = E[(Phi - E Phi)(Phi - E Phi)^T]`; `diag(0, h_1, .., h_N)` up to quadrature error.
pub fn basis_var_matrix(basis: &OrthoBasis, rule: &QuadratureRule) -> DMatrix<f64> {
    let mean = rule.expect_with(|q| {
        let v = basis.eval_std(q.std);
        let n = v.len();
        v.reshape_generic(nalgebra::Dyn(n), nalgebra::Dyn(1))
    });
    let mean = mean.column(0).into_owned();
    rule.expect_with(|q| {
        let d = basis.eval_std(q.std) - &mean;
        &d * d.transpose()
    })
}

/// Linearly independent subset `theta_0 .. theta_M` of the products `phi_i phi_j`.
#[derive(Debug, Clone)]
pub struct QuadraticBasis {
    parent: OrthoBasis,
    functions: Vec<Polynomial>,
    pair_map: Vec<(usize, usize)>,
}

impl QuadraticBasis {
    pub fn parent(&self) -> &OrthoBasis {
        &self.parent
    }

    /// Number of functions, `M + 1`.
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[Polynomial] {
        &self.functions
    }

    /// `(i, j)` such that `theta_k = phi_i phi_j`.
    pub fn pair_map(&self) -> &[(usize, usize)] {
        &self.pair_map
    }

    /// Highest total degree among the `theta`.
    pub fn degree(&self) -> u32 {
        self.functions
            .iter()
            .map(Polynomial::degree)
            .max()
            .unwrap_or(0)
    }

    pub fn eval_std(&self, xi: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.functions.iter().map(|f| f.eval(xi)))
    }

    /// Largest relative L2 residual of projecting any `phi_i phi_j` onto span{theta}.
    pub fn reconstruction_residual(&self) -> f64 {
        let rule = self.exact_rule();
        let w = DVector::from_column_slice(rule.weights());
        // rows: quadrature nodes
        let theta = DMatrix::from_fn(rule.len(), self.len(), |q, k| {
            self.functions[k].eval(&rule.std_nodes()[q])
        });
        let phi = DMatrix::from_fn(rule.len(), self.parent.len(), |q, k| {
            self.parent.functions[k].eval(&rule.std_nodes()[q])
        });
        let weighted = DMatrix::from_fn(theta.nrows(), theta.ncols(), |q, k| w[q] * theta[(q, k)]);
        let gram = theta.transpose() * &weighted;
        let chol = match gram.cholesky() {
            Some(c) => c,
            None => return f64::INFINITY,
        };
        let mut worst: f64 = 0.0;
        for i in 0..self.parent.len() {
            for j in i..self.parent.len() {
                let prod = phi.column(i).component_mul(&phi.column(j));
                let coef = chol.solve(&(weighted.transpose() * &prod));
                let resid = &prod - &theta * coef;
                let num: f64 = resid.iter().zip(w.iter()).map(|(r, w)| w * r * r).sum();
                let den: f64 = prod.iter().zip(w.iter()).map(|(p, w)| w * p * p).sum();
                worst = worst.max((num / den).sqrt());
            }
        }
        worst
    }

    /// A standard-coordinate rule exact for products of two `theta`.
    fn exact_rule(&self) -> QuadratureRule {
        let deg = 4 * self.parent.total_order;
        QuadratureRule::build(self.parent.distribution(), points_for_degree(deg))
            .expect("positive point count")
    }
}

const RANK_TOL: f64 = 1e-10;

/// Selects independent products by pivoted Cholesky on their (unit-normalized)
/// Gram matrix.
///
/// The constant `phi_0 phi_0 = 1` is always the first pivot, so `theta_0 = 1`;
/// afterwards the candidate with the largest remaining Schur diagonal is taken
/// until every remaining diagonal falls below `1e-10`. The selected functions
/// are returned in candidate order.
pub fn build_quadratic_basis(basis: &OrthoBasis) -> Result<QuadraticBasis> {
    let n = basis.len();
    let mut pairs = Vec::new();
    let mut candidates = Vec::new();
    for i in 0..n {
        for j in i..n {
            pairs.push((i, j));
            candidates.push(basis.functions[i].mul(&basis.functions[j]));
        }
    }

    let rule = QuadratureRule::build(
        basis.distribution(),
        points_for_degree(4 * basis.total_order()),
    )?;
    let c = candidates.len();
    let mut gram = DMatrix::<f64>::zeros(c, c);
    for q in rule.iter() {
        let v: Vec<f64> = candidates.iter().map(|p| p.eval(q.std)).collect();
        for a in 0..c {
            for b in a..c {
                gram[(a, b)] += q.weight * v[a] * v[b];
            }
        }
    }
    for a in 0..c {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let scale: Vec<f64> = (0..c).map(|a| gram[(a, a)].sqrt()).collect();
    for a in 0..c {
        for b in 0..c {
            gram[(a, b)] /= scale[a] * scale[b];
        }
    }

    // Pivoted Cholesky; `factor` holds the columns computed so far.
    let mut diag: Vec<f64> = (0..c).map(|a| gram[(a, a)]).collect();
    let mut factor: Vec<Vec<f64>> = Vec::new();
    let mut selected: Vec<usize> = Vec::new();
    let mut pivot = Some(0usize);
    while let Some(p) = pivot {
        let d = diag[p];
        if d <= RANK_TOL {
            break;
        }
        let root = d.sqrt();
        let col: Vec<f64> = (0..c)
            .map(|a| {
                let s: f64 = factor.iter().map(|l| l[a] * l[p]).sum();
                (gram[(a, p)] - s) / root
            })
            .collect();
        for a in 0..c {
            diag[a] -= col[a] * col[a];
        }
        diag[p] = 0.0;
        factor.push(col);
        selected.push(p);
        pivot = (0..c)
            .filter(|a| !selected.contains(a))
            .max_by(|&a, &b| diag[a].total_cmp(&diag[b]));
    }
    if selected.is_empty() {
        return Err(Error::config(
            "quadratic basis selection found no independent product",
        ));
    }
    selected.sort_unstable();

    let order = basis.total_order() as usize;
    if basis.distribution().dims() == 1 && order >= 1 && selected.len() != 2 * (order - 1) + 1 {
        warn!(
            "quadratic basis has M + 1 = {} independent functions; the count M = 2(N-1) gives {}",
            selected.len(),
            2 * (order - 1) + 1
        );
    }

    Ok(QuadraticBasis {
        parent: basis.clone(),
        functions: selected.iter().map(|&k| candidates[k].clone()).collect(),
        pair_map: selected.iter().map(|&k| pairs[k]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(a: f64, b: f64) -> ParameterDistribution {
        ParameterDistribution::uniform(a, b).unwrap()
    }

    #[test]
    fn legendre_order_two() {
        let b = build_basis(&uniform(-1.0, 1.0), 2).unwrap();
        assert_eq!(b.len(), 3);
        let x = 0.37;
        let phi = b.eval(&[x]);
        assert!((phi[0] - 1.0).abs() < 1e-15);
        assert!((phi[1] - x).abs() < 1e-15);
        assert!((phi[2] - (3.0 * x * x - 1.0) / 2.0).abs() < 1e-15);
        assert_eq!(b.norms(), &[1.0, 1.0 / 3.0, 1.0 / 5.0]);
    }

    #[test]
    fn order_zero_is_constant() {
        for d in [
            uniform(-2.0, 5.0),
            ParameterDistribution::gaussian(1.0, 3.0).unwrap(),
        ] {
            let b = build_basis(&d, 0).unwrap();
            assert_eq!(b.len(), 1);
            assert_eq!(b.norms(), &[1.0]);
            assert_eq!(b.eval(&[0.7])[0], 1.0);
        }
    }

    #[test]
    fn mapped_interval() {
        let d = uniform(-0.3, 0.3);
        let b = build_basis(&d, 1).unwrap();
        assert!((b.eval(&[0.15])[1] - 0.5).abs() < 1e-15);
        let rule = QuadratureRule::build(&d, 2).unwrap();
        let h1 = rule.expect_scalar(|q| b.eval(q.param)[1].powi(2));
        assert!((h1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn hermite_norms_are_factorials() {
        let d = ParameterDistribution::gaussian(2.0, 0.5).unwrap();
        let b = build_basis(&d, 4).unwrap();
        let rule = QuadratureRule::build(&d, 9).unwrap();
        let g = b.gram(&rule);
        for i in 0..5 {
            assert!((g[(i, i)] - b.norms()[i]).abs() < 1e-10 * b.norms()[i]);
        }
        assert_eq!(b.norms()[4], 24.0);
    }

    #[test]
    fn basis_count_multivariate() {
        let d = ParameterDistribution::new(vec![
            super::super::Marginal::Uniform {
                lower: 0.0,
                upper: 1.0,
            },
            super::super::Marginal::Gaussian {
                mean: 0.0,
                stddev: 1.0,
            },
            super::super::Marginal::Uniform {
                lower: -1.0,
                upper: 3.0,
            },
        ])
        .unwrap();
        let b = build_basis(&d, 3).unwrap();
        assert_eq!(b.len(), 20);
        assert_eq!(b.multi_indices()[1], vec![1, 0, 0]);
    }

    #[test]
    fn var_matrix_legendre() {
        let d = uniform(-1.0, 1.0);
        let b = build_basis(&d, 2).unwrap();
        let rule = QuadratureRule::build(&d, 3).unwrap();
        let v = basis_var_matrix(&b, &rule);
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0 / 3.0, 0.2]));
        assert!((v - expected).amax() < 1e-14);

        let b0 = build_basis(&d, 0).unwrap();
        assert_eq!(basis_var_matrix(&b0, &rule)[(0, 0)], 0.0);
    }

    #[test]
    fn quadratic_basis_sizes() {
        let d = uniform(-1.0, 1.0);
        let q0 = build_quadratic_basis(&build_basis(&d, 0).unwrap()).unwrap();
        assert_eq!(q0.len(), 1);
        assert_eq!(q0.pair_map(), &[(0, 0)]);
        let q1 = build_quadratic_basis(&build_basis(&d, 1).unwrap()).unwrap();
        assert_eq!(q1.len(), 3);
        let q2 = build_quadratic_basis(&build_basis(&d, 2).unwrap()).unwrap();
        assert_eq!(q2.len(), 5);
        assert_eq!(q2.pair_map()[0], (0, 0));
        assert!(q2.reconstruction_residual() < 1e-10);
    }

    #[test]
    fn quadratic_basis_hermite_keeps_constant_first() {
        let d = ParameterDistribution::gaussian(0.0, 1.0).unwrap();
        let q = build_quadratic_basis(&build_basis(&d, 4).unwrap()).unwrap();
        assert_eq!(q.len(), 9);
        assert_eq!(q.pair_map()[0], (0, 0));
        assert!(q.reconstruction_residual() < 1e-10);
    }
}
