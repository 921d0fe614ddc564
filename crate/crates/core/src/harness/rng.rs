//! Seeded, scheduling-independent random streams.
//!
//! Every run draws from its own ChaCha20 stream keyed by `(seed, stream)`, so
//! the numbers a run sees depend only on its position in the ensemble, never on
//! which thread executes it or in what order.

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::chaos::{Marginal, ParameterDistribution};

pub struct NoiseStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl NoiseStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via the Box–Muller transform (both outputs are used).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn normal_vec(&mut self, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| self.normal())
    }

    /// Draw from `N(0, L Lᵀ)` given the factor `L`.
    pub fn gaussian(&mut self, factor: &DMatrix<f64>) -> DVector<f64> {
        let z = self.normal_vec(factor.ncols());
        factor * z
    }

    pub fn sample_parameter(&mut self, dist: &ParameterDistribution) -> Vec<f64> {
        dist.marginals()
            .iter()
            .map(|m| match *m {
                Marginal::Uniform { lower, upper } => lower + (upper - lower) * self.uniform(),
                Marginal::Gaussian { mean, stddev } => mean + stddev * self.normal(),
                Marginal::Point { value } => value,
            })
            .collect()
    }
}
