//! The two reference benchmark systems and their shipped configs.

use nalgebra::DMatrix;

use crate::chaos::{ParameterDistribution, Polynomial};
use crate::config::{parse_system, BenchmarkConfig};
use crate::error::{Error, Result};
use crate::system::{MatrixPolynomial, TimeMode, UncertainLinearSystem};

pub const BENCHMARK_DT: &str = include_str!("../../../configs/benchmark_dt.toml");
pub const BENCHMARK_CT: &str = include_str!("../../../configs/benchmark_ct.toml");

/// Shipped config text by name (`benchmark_dt`, `benchmark_ct`).
pub fn shipped(name: &str) -> Option<&'static str> {
    match name.trim_end_matches(".toml") {
        "benchmark_dt" => Some(BENCHMARK_DT),
        "benchmark_ct" => Some(BENCHMARK_CT),
        _ => None,
    }
}

pub fn load_shipped(name: &str) -> Result<BenchmarkConfig> {
    let text =
        shipped(name).ok_or_else(|| Error::config(format!("no shipped config named '{name}'")))?;
    parse_system(text)
}

fn poly_matrix(rows: usize, cols: usize, entries: &[&str]) -> MatrixPolynomial {
    MatrixPolynomial::new(
        rows,
        cols,
        entries
            .iter()
            .map(|e| Polynomial::parse(e, 1).expect("valid literal"))
            .collect(),
    )
    .expect("shape matches")
}

/// `x_k = [0 -0.5; 1 1+d] x_{k-1} + [-6; 1] w`, `y = [-100 10] x + n`, `d ~ U(-0.3, 0.3)`.
pub fn dt_system() -> UncertainLinearSystem {
    UncertainLinearSystem::new(
        poly_matrix(2, 2, &["0", "-0.5", "1", "1 + d1"]),
        poly_matrix(2, 1, &["-6", "1"]),
        DMatrix::from_row_slice(1, 2, &[-100.0, 10.0]),
        DMatrix::identity(1, 1),
        DMatrix::identity(1, 1),
        ParameterDistribution::uniform(-0.3, 0.3).expect("valid"),
        TimeMode::Discrete,
    )
    .expect("valid benchmark")
}

/// `x' = [0 -1+d; 1 -0.5] x + [-2; 1] w`, `y = [-100 -100] x + n`, `d ~ U(-0.95, 0.95)`, `dt = 0.1`.
pub fn ct_system() -> UncertainLinearSystem {
    UncertainLinearSystem::new(
        poly_matrix(2, 2, &["0", "-1 + d1", "1", "-0.5"]),
        poly_matrix(2, 1, &["-2", "1"]),
        DMatrix::from_row_slice(1, 2, &[-100.0, -100.0]),
        DMatrix::identity(1, 1),
        DMatrix::identity(1, 1),
        ParameterDistribution::uniform(-0.95, 0.95).expect("valid"),
        TimeMode::Continuous { sample_period: 0.1 },
    )
    .expect("valid benchmark")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_configs_match_programmatic_systems() {
        for (cfg, sys) in [
            (load_shipped("benchmark_dt").unwrap(), dt_system()),
            (load_shipped("benchmark_ct.toml").unwrap(), ct_system()),
        ] {
            assert_eq!(cfg.system.a_poly(), sys.a_poly());
            assert_eq!(cfg.system.b_poly(), sys.b_poly());
            assert_eq!(cfg.system.c(), sys.c());
            assert_eq!(cfg.system.delta_dist(), sys.delta_dist());
            assert_eq!(cfg.system.time_mode(), sys.time_mode());
        }
        assert!(shipped("nope").is_none());
    }
}
