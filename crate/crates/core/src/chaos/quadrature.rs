//! Tensorized Gauss rules for expectations over the parameter law.

use nalgebra::{DMatrix, SymmetricEigen};

use super::distribution::{Family, ParameterDistribution};
use crate::error::{Error, Result};

/// Three-term recurrence coefficient `b_k` of the orthonormal family,
/// `x p_k = b_{k+1} p_{k+1} + b_k p_{k-1}` (both families are symmetric, so
/// the diagonal terms vanish).
fn recurrence_b(family: Family, k: usize) -> f64 {
    let k = k as f64;
    match family {
        Family::Legendre => k / (4.0 * k * k - 1.0).sqrt(),
        Family::Hermite => k.sqrt(),
    }
}

/// Values and derivatives of the orthonormal polynomials `p_0 .. p_n` at `x`.
fn orthonormal_upto(family: Family, n: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; n + 1];
    let mut dp = vec![0.0; n + 1];
    p[0] = 1.0;
    if n >= 1 {
        let b1 = recurrence_b(family, 1);
        p[1] = x / b1;
        dp[1] = 1.0 / b1;
    }
    for k in 1..n {
        let bk = recurrence_b(family, k);
        let bk1 = recurrence_b(family, k + 1);
        p[k + 1] = (x * p[k] - bk * p[k - 1]) / bk1;
        dp[k + 1] = (p[k] + x * dp[k] - bk * dp[k - 1]) / bk1;
    }
    (p, dp)
}

/// `n`-point Gauss rule for the standard law of `family` (weights sum to 1).
///
/// Golub-Welsch eigenvalues seed a Newton polish on `p_n`; weights come from
/// the Christoffel function `1 / sum_{k<n} p_k(x)^2`.
pub fn gauss_rule(family: Family, n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    if n == 1 {
        return (vec![0.0], vec![1.0]);
    }
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = recurrence_b(family, k);
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    for x in nodes.iter_mut() {
        for _ in 0..8 {
            let (p, dp) = orthonormal_upto(family, n, *x);
            let step = p[n] / dp[n];
            *x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }
    // exact reflection symmetry keeps odd moments at zero
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let m = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -m;
        nodes[j] = m;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }

    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let (p, _) = orthonormal_upto(family, n - 1, x);
            1.0 / p.iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    (nodes, weights)
}

/// A node of a tensor rule, in both standard (`xi`) and parameter (`delta`) coordinates.
#[derive(Debug, Clone, Copy)]
pub struct QuadNode<'a> {
    pub std: &'a [f64],
    pub param: &'a [f64],
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    std_nodes: Vec<Vec<f64>>,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
    points_per_dim: usize,
}

impl QuadratureRule {
    /// Full tensor grid of `points_per_dim`-point Gauss rules, one per dimension.
    pub fn build(dist: &ParameterDistribution, points_per_dim: usize) -> Result<Self> {
        if points_per_dim == 0 {
            return Err(Error::config(
                "quadrature needs at least one point per dimension",
            ));
        }
        let per_dim: Vec<(Vec<f64>, Vec<f64>)> = dist
            .marginals()
            .iter()
            .map(|m| gauss_rule(m.family(), points_per_dim))
            .collect();
        let total = points_per_dim
            .checked_pow(dist.dims() as u32)
            .filter(|t| *t <= 50_000_000)
            .ok_or_else(|| Error::config("tensor quadrature grid too large"))?;

        let mut std_nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; dist.dims()];
        for _ in 0..total {
            std_nodes.push(
                idx.iter()
                    .enumerate()
                    .map(|(k, &i)| per_dim[k].0[i])
                    .collect::<Vec<_>>(),
            );
            weights.push(
                idx.iter()
                    .enumerate()
                    .map(|(k, &i)| per_dim[k].1[i])
                    .product(),
            );
            // odometer, last dimension fastest
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < points_per_dim {
                    break;
                }
                idx[k] = 0;
            }
        }
        let nodes = std_nodes.iter().map(|xi| dist.to_param(xi)).collect();
        Ok(Self {
            std_nodes,
            nodes,
            weights,
            points_per_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Parameter-space nodes.
    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn std_nodes(&self) -> &[Vec<f64>] {
        &self.std_nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    /// Highest per-dimension degree integrated exactly.
    pub fn exactness_degree(&self) -> usize {
        2 * self.points_per_dim - 1
    }

    pub fn iter(&self) -> impl Iterator<Item = QuadNode<'_>> {
        self.std_nodes
            .iter()
            .zip(&self.nodes)
            .zip(&self.weights)
            .map(|((s, p), &w)| QuadNode {
                std: s,
                param: p,
                weight: w,
            })
    }

    /// `E[f(delta)]` entrywise, `f` evaluated at parameter-space nodes.
    pub fn expect(&self, f: impl Fn(&[f64]) -> DMatrix<f64>) -> DMatrix<f64> {
        self.expect_with(|q| f(q.param))
    }

    /// As [`QuadratureRule::expect`], but the integrand sees the whole node.
    pub fn expect_with(&self, f: impl Fn(&QuadNode<'_>) -> DMatrix<f64>) -> DMatrix<f64> {
        let mut it = self.iter();
        let first = it.next().expect("rule has at least one node");
        let mut acc = f(&first) * first.weight;
        for q in it {
            acc += f(&q) * q.weight;
        }
        acc
    }

    pub fn expect_scalar(&self, f: impl Fn(&QuadNode<'_>) -> f64) -> f64 {
        self.iter().map(|q| q.weight * f(&q)).sum()
    }
}

/// Points per dimension for integrands whose per-variable degree is at most `degree`.
pub fn points_for_degree(degree: u32) -> usize {
    degree as usize + 1
}
