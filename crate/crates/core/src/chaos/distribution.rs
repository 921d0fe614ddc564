use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orthogonal polynomial family attached to a marginal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Legendre polynomials on the standard variable in `[-1, 1]`.
    Legendre,
    /// Probabilists' Hermite polynomials on a standard normal variable.
    Hermite,
}

/// One independent dimension of the parameter vector.
///
/// Every marginal is an affine image `delta = loc + scale * xi` of a standard
/// variable `xi` (uniform on `[-1, 1]` or standard normal). A point mass is
/// the zero-scale limit of a uniform marginal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Marginal {
    Uniform { lower: f64, upper: f64 },
    Gaussian { mean: f64, stddev: f64 },
    Point { value: f64 },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Marginal::Uniform { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite()) {
                    return Err(Error::config("uniform bounds must be finite"));
                }
                if lower >= upper {
                    return Err(Error::config(format!(
                        "uniform requires lower < upper (got lower = {lower}, upper = {upper})"
                    )));
                }
            }
            Marginal::Gaussian { mean, stddev } => {
                if !mean.is_finite() || !stddev.is_finite() || stddev <= 0.0 {
                    return Err(Error::config(format!(
                        "gaussian requires finite mean and stddev > 0 (got stddev = {stddev})"
                    )));
                }
            }
            Marginal::Point { value } => {
                if !value.is_finite() {
                    return Err(Error::config("point mass value must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn family(&self) -> Family {
        match self {
            Marginal::Uniform { .. } | Marginal::Point { .. } => Family::Legendre,
            Marginal::Gaussian { .. } => Family::Hermite,
        }
    }

    pub fn loc(&self) -> f64 {
        match *self {
            Marginal::Uniform { lower, upper } => 0.5 * (lower + upper),
            Marginal::Gaussian { mean, .. } => mean,
            Marginal::Point { value } => value,
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            Marginal::Uniform { lower, upper } => 0.5 * (upper - lower),
            Marginal::Gaussian { stddev, .. } => stddev,
            Marginal::Point { .. } => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.loc()
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Marginal::Uniform { lower, upper } => (upper - lower).powi(2) / 12.0,
            Marginal::Gaussian { stddev, .. } => stddev * stddev,
            Marginal::Point { .. } => 0.0,
        }
    }

    pub fn to_param(&self, xi: f64) -> f64 {
        self.loc() + self.scale() * xi
    }

    /// Inverse of [`Marginal::to_param`]; a point mass maps everything to 0.
    pub fn to_standard(&self, delta: f64) -> f64 {
        let s = self.scale();
        if s == 0.0 {
            0.0
        } else {
            (delta - self.loc()) / s
        }
    }
}

/// Joint law of mutually independent parameter dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterDistribution {
    marginals: Vec<Marginal>,
}

impl ParameterDistribution {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::config(
                "parameter distribution needs at least one dimension",
            ));
        }
        for (k, m) in marginals.iter().enumerate() {
            m.validate()
                .map_err(|e| Error::config(format!("parameter d{}: {e}", k + 1)))?;
        }
        Ok(Self { marginals })
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![Marginal::Uniform { lower, upper }])
    }

    pub fn gaussian(mean: f64, stddev: f64) -> Result<Self> {
        Self::new(vec![Marginal::Gaussian { mean, stddev }])
    }

    pub fn point(value: f64) -> Result<Self> {
        Self::new(vec![Marginal::Point { value }])
    }

    pub fn dims(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn mean(&self) -> Vec<f64> {
        self.marginals.iter().map(Marginal::mean).collect()
    }

    pub fn to_param(&self, xi: &[f64]) -> Vec<f64> {
        self.marginals
            .iter()
            .zip(xi)
            .map(|(m, &x)| m.to_param(x))
            .collect()
    }

    pub fn to_standard(&self, delta: &[f64]) -> Vec<f64> {
        self.marginals
            .iter()
            .zip(delta)
            .map(|(m, &d)| m.to_standard(d))
            .collect()
    }

    /// Same dimensions collapsed onto their means.
    pub fn degenerate_at_mean(&self) -> Self {
        Self {
            marginals: self
                .marginals
                .iter()
                .map(|m| Marginal::Point { value: m.mean() })
                .collect(),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.marginals.iter().all(|m| m.scale() == 0.0)
    }

    /// Short human description, e.g. `U(-0.3,0.3)`.
    pub fn describe(&self) -> String {
        self.marginals
            .iter()
            .map(|m| match *m {
                Marginal::Uniform { lower, upper } => format!("U({lower},{upper})"),
                Marginal::Gaussian { mean, stddev } => format!("N({mean},{stddev}^2)"),
                Marginal::Point { value } => format!("point({value})"),
            })
            .collect::<Vec<_>>()
            .join(" x ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_marginals() {
        assert!(ParameterDistribution::uniform(0.3, -0.3).is_err());
        assert!(ParameterDistribution::uniform(0.3, 0.3).is_err());
        assert!(ParameterDistribution::gaussian(0.0, 0.0).is_err());
        assert!(ParameterDistribution::gaussian(0.0, -1.0).is_err());
        assert!(ParameterDistribution::new(vec![]).is_err());
        assert!(ParameterDistribution::point(f64::NAN).is_err());
    }

    #[test]
    fn affine_map() {
        let m = Marginal::Uniform {
            lower: 0.0,
            upper: 0.6,
        };
        assert!((m.to_param(-1.0) - 0.0).abs() < 1e-15);
        assert!((m.to_param(1.0) - 0.6).abs() < 1e-15);
        assert!((m.to_standard(0.45) - 0.5).abs() < 1e-15);
        assert!((m.variance() - 0.03).abs() < 1e-15);
    }
}
