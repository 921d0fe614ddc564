//! Robust Kalman filtering for linear systems whose dynamics depend on an
//! uncertain, probabilistically described parameter.
//!
//! The robust filters propagate the first two moments of the state marginalized
//! over the parameter: the discrete-time filter via quadrature over the parameter
//! distribution, the continuous-discrete filter via a polynomial-chaos Galerkin
//! system integrated between measurements. Both share an ordinary Kalman update.

pub mod benchmarks;
pub mod chaos;
pub mod compare;
pub mod config;
pub mod discrete;
pub mod error;
pub mod filter;
pub mod harness;
pub mod hybrid;
pub mod io;
pub mod linalg;
pub mod system;

pub use error::{Error, Result};
pub use filter::{Filter, FilterKind};
pub use system::{GaussianBelief, TimeMode, UncertainLinearSystem};
