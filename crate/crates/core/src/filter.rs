use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::GaussianBelief;

/// A predict/update estimator driven one measurement at a time.
pub trait Filter: Send + Sync {
    /// Prior at the next measurement time from the current posterior.
    fn predict(&self, posterior: &GaussianBelief) -> Result<GaussianBelief>;

    fn update(&self, prior: &GaussianBelief, y: &DVector<f64>) -> Result<GaussianBelief>;

    fn step(&self, posterior: &GaussianBelief, y: &DVector<f64>) -> Result<GaussianBelief> {
        let prior = self.predict(posterior)?;
        self.update(&prior, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Robust,
    Nominal,
}

impl FilterKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FilterKind::Robust => "robust",
            FilterKind::Nominal => "nominal",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "robust" => Ok(FilterKind::Robust),
            "nominal" => Ok(FilterKind::Nominal),
            other => Err(Error::config(format!(
                "unknown filter '{other}' (expected robust or nominal)"
            ))),
        }
    }
}
