//! Ground-truth trajectories and measurements.

use nalgebra::{DMatrix, DVector};

use super::rng::NoiseStream;
use crate::error::{Error, Result};
use crate::linalg::{psd_factor, van_loan};
use crate::system::{TimeMode, UncertainLinearSystem};

/// Where the plant parameter comes from during a simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum DeltaSource {
    /// One value held for the whole run.
    Fixed(Vec<f64>),
    /// A fresh draw from the system's parameter law every step / interval.
    Iid,
}

/// `states[k]` and `measurements[k]` belong to time `k + 1`; the initial state is not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub states: Vec<DVector<f64>>,
    pub measurements: Vec<DVector<f64>>,
    pub deltas: Vec<Vec<f64>>,
}

struct Step {
    transition: DMatrix<f64>,
    noise_factor: DMatrix<f64>,
}

fn dt_step(sys: &UncertainLinearSystem, delta: &[f64], q_factor: &DMatrix<f64>) -> Step {
    Step {
        transition: sys.eval_a(delta),
        noise_factor: sys.eval_b(delta) * q_factor,
    }
}

fn ct_step(sys: &UncertainLinearSystem, delta: &[f64], dt: f64) -> Result<Step> {
    let (phi, qd) = van_loan(&sys.eval_a(delta), &sys.process_noise(delta), dt)?;
    Ok(Step {
        transition: phi,
        noise_factor: psd_factor(&qd)?,
    })
}

fn simulate(
    sys: &UncertainLinearSystem,
    source: &DeltaSource,
    x0: &DVector<f64>,
    noise: &mut NoiseStream,
    steps: usize,
    make_step: impl Fn(&[f64]) -> Result<Step>,
) -> Result<Truth> {
    if x0.len() != sys.state_dim() {
        return Err(Error::config(format!(
            "initial state has length {}, expected {}",
            x0.len(),
            sys.state_dim()
        )));
    }
    let r_factor = psd_factor(sys.r())?;
    let fixed = match source {
        DeltaSource::Fixed(d) => {
            if d.len() != sys.delta_dist().dims() {
                return Err(Error::config("fixed parameter has the wrong dimension"));
            }
            Some((d.clone(), make_step(d)?))
        }
        DeltaSource::Iid => None,
    };

    let mut x = x0.clone();
    let mut truth = Truth {
        states: Vec::with_capacity(steps),
        measurements: Vec::with_capacity(steps),
        deltas: Vec::with_capacity(steps),
    };
    for _ in 0..steps {
        let (delta, fresh);
        let step = match &fixed {
            Some((d, s)) => {
                delta = d.clone();
                s
            }
            None => {
                delta = noise.sample_parameter(sys.delta_dist());
                fresh = make_step(&delta)?;
                &fresh
            }
        };
        x = &step.transition * &x + noise.gaussian(&step.noise_factor);
        let y = sys.c() * &x + noise.gaussian(&r_factor);
        truth.states.push(x.clone());
        truth.measurements.push(y);
        truth.deltas.push(delta);
    }
    Ok(truth)
}

/// `x_k = A(δ_{k-1}) x_{k-1} + B(δ_{k-1}) w_{k-1}`, `y_k = C x_k + n_k`.
pub fn simulate_truth_dt(
    sys: &UncertainLinearSystem,
    source: &DeltaSource,
    x0: &DVector<f64>,
    noise: &mut NoiseStream,
    steps: usize,
) -> Result<Truth> {
    let q_factor = psd_factor(sys.q())?;
    simulate(sys, source, x0, noise, steps, |d| {
        Ok(dt_step(sys, d, &q_factor))
    })
}

/// Exact sampled-data solution of `x' = A(δ) x + B(δ) w` over intervals of
/// length `dt`, with δ constant on each interval.
pub fn simulate_truth_ct(
    sys: &UncertainLinearSystem,
    source: &DeltaSource,
    x0: &DVector<f64>,
    noise: &mut NoiseStream,
    steps: usize,
    dt: f64,
) -> Result<Truth> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config("sample period must be positive"));
    }
    simulate(sys, source, x0, noise, steps, |d| ct_step(sys, d, dt))
}

/// Dispatches on the system's time mode.
pub fn simulate_truth(
    sys: &UncertainLinearSystem,
    source: &DeltaSource,
    x0: &DVector<f64>,
    noise: &mut NoiseStream,
    steps: usize,
) -> Result<Truth> {
    match sys.time_mode() {
        TimeMode::Discrete => simulate_truth_dt(sys, source, x0, noise, steps),
        TimeMode::Continuous { sample_period } => {
            simulate_truth_ct(sys, source, x0, noise, steps, sample_period)
        }
    }
}
