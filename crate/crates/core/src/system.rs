//! Linear models whose dynamics matrices depend polynomially on random parameters:
//!
//! - DT: `x_k = A(delta_{k-1}) x_{k-1} + B(delta_{k-1}) w_{k-1}`
//! - CT: `x'(t) = A(delta_{k-1}) x(t) + B(delta_{k-1}) w(t)` on `[t_{k-1}, t_k)`
//!
//! measured as `y_k = C x_k + n_k` with `w ~ N(0, Q)`, `n ~ N(0, R)`.

use nalgebra::{DMatrix, DVector};

use crate::chaos::{ParameterDistribution, Polynomial, QuadratureRule};
use crate::error::{Error, Result};
use crate::linalg;

/// Matrix whose entries are polynomials in the parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPolynomial {
    rows: usize,
    cols: usize,
    entries: Vec<Polynomial>, // row-major
}

impl MatrixPolynomial {
    pub fn new(rows: usize, cols: usize, entries: Vec<Polynomial>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::config(format!(
                "matrix polynomial {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some(first) = entries.first() {
            if entries.iter().any(|e| e.dims() != first.dims()) {
                return Err(Error::config(
                    "matrix polynomial entries disagree on parameter count",
                ));
            }
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn constant(m: &DMatrix<f64>, dims: usize) -> Self {
        let entries = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| Polynomial::constant(dims, m[(i, j)]))
            .collect();
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> &Polynomial {
        &self.entries[i * self.cols + j]
    }

    /// Max total degree over entries.
    pub fn degree(&self) -> u32 {
        self.entries
            .iter()
            .map(Polynomial::degree)
            .max()
            .unwrap_or(0)
    }

    /// Max single-variable degree over entries.
    pub fn max_univariate_degree(&self) -> u32 {
        self.entries
            .iter()
            .map(Polynomial::max_univariate_degree)
            .max()
            .unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.entries.iter().all(Polynomial::is_constant)
    }

    pub fn eval(&self, delta: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.entry(i, j).eval(delta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeMode {
    /// Discrete-time dynamics.
    Discrete,
    /// Continuous-time dynamics sampled every `sample_period`.
    Continuous { sample_period: f64 },
}

#[derive(Debug, Clone)]
pub struct UncertainLinearSystem {
    a: MatrixPolynomial,
    b: MatrixPolynomial,
    c: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    delta_dist: ParameterDistribution,
    time_mode: TimeMode,
}

impl UncertainLinearSystem {
    pub fn new(
        a: MatrixPolynomial,
        b: MatrixPolynomial,
        c: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        delta_dist: ParameterDistribution,
        time_mode: TimeMode,
    ) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n || n == 0 {
            return Err(Error::config(format!(
                "A must be square and nonempty, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if b.rows() != n {
            return Err(Error::config(format!(
                "B must have {n} rows, got {}",
                b.rows()
            )));
        }
        let m = b.cols();
        if c.ncols() != n || c.nrows() == 0 {
            return Err(Error::config(format!(
                "C must be p x {n}, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        let p = c.nrows();
        if q.shape() != (m, m) {
            return Err(Error::config(format!(
                "Q must be {m}x{m}, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        if r.shape() != (p, p) {
            return Err(Error::config(format!(
                "R must be {p}x{p}, got {}x{}",
                r.nrows(),
                r.ncols()
            )));
        }
        let dims = delta_dist.dims();
        for (name, mp) in [("A", &a), ("B", &b)] {
            if mp.entries.iter().any(|e| e.dims() != dims) {
                return Err(Error::config(format!(
                    "{name} entries must be polynomials in {dims} parameter(s)"
                )));
            }
        }
        if c.iter()
            .chain(q.iter())
            .chain(r.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::config("C, Q and R must be finite"));
        }
        if !linalg::is_psd(&q, 1e-12) {
            return Err(Error::config("Q must be symmetric positive semidefinite"));
        }
        if (&r - r.transpose()).amax() > 1e-12 * r.amax().max(1.0) || r.clone().cholesky().is_none()
        {
            return Err(Error::config("R must be positive definite"));
        }
        if let TimeMode::Continuous { sample_period } = time_mode {
            if !(sample_period.is_finite() && sample_period > 0.0) {
                return Err(Error::config("sample_period must be > 0"));
            }
        }
        Ok(Self {
            a,
            b,
            c,
            q,
            r,
            delta_dist,
            time_mode,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn noise_dim(&self) -> usize {
        self.b.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn a_poly(&self) -> &MatrixPolynomial {
        &self.a
    }

    pub fn b_poly(&self) -> &MatrixPolynomial {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn delta_dist(&self) -> &ParameterDistribution {
        &self.delta_dist
    }

    pub fn time_mode(&self) -> TimeMode {
        self.time_mode
    }

    pub fn eval_a(&self, delta: &[f64]) -> DMatrix<f64> {
        self.a.eval(delta)
    }

    pub fn eval_b(&self, delta: &[f64]) -> DMatrix<f64> {
        self.b.eval(delta)
    }

    /// `B(delta) Q B(delta)^T`.
    pub fn process_noise(&self, delta: &[f64]) -> DMatrix<f64> {
        let b = self.eval_b(delta);
        linalg::symmetrized(&b * &self.q * b.transpose())
    }

    /// `E[A(Delta)]` under `rule`.
    pub fn mean_a(&self, rule: &QuadratureRule) -> DMatrix<f64> {
        rule.expect(|d| self.eval_a(d))
    }

    /// The same model with the parameter law replaced.
    pub fn with_distribution(&self, dist: ParameterDistribution) -> Result<Self> {
        if dist.dims() != self.delta_dist.dims() {
            return Err(Error::config(
                "replacement distribution has a different dimension",
            ));
        }
        let mut out = self.clone();
        out.delta_dist = dist;
        Ok(out)
    }

    /// Parameter collapsed onto its mean: the nominal plant.
    pub fn nominal(&self) -> Self {
        let mut out = self.clone();
        out.delta_dist = self.delta_dist.degenerate_at_mean();
        out
    }
}

/// Gaussian belief on the state: mean and symmetric PSD covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Law of the initial state.
pub type InitialBelief = GaussianBelief;

impl GaussianBelief {
    /// Validated constructor; the covariance is re-symmetrized.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.shape() != (mean.len(), mean.len()) {
            return Err(Error::config(format!(
                "covariance must be {0}x{0}, got {1}x{2}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("mean must be finite"));
        }
        if !linalg::is_psd(&cov, 1e-10) {
            return Err(Error::config(
                "covariance must be symmetric positive semidefinite",
            ));
        }
        Ok(Self {
            mean,
            cov: linalg::symmetrized(cov),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn is_finite(&self) -> bool {
        self.mean
            .iter()
            .chain(self.cov.iter())
            .all(|v| v.is_finite())
    }
}
