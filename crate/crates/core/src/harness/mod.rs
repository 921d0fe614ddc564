//! Monte-Carlo ensembles: simulate the uncertain plant, run the filters, and
//! reduce absolute estimation errors to tables and per-step bands.

pub mod metrics;
pub mod rng;
pub mod truth;

use std::ops::Range;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::chaos::{Marginal, ParameterDistribution};
use crate::config::{BenchmarkConfig, Case, DeltaModeSetting};
use crate::discrete::{DtRobustFilter, NominalDtFilter};
use crate::error::{Error, Result};
use crate::filter::{Filter, FilterKind};
use crate::hybrid::{CdRobustFilter, NominalCdFilter};
use crate::system::{GaussianBelief, TimeMode, UncertainLinearSystem};

pub use metrics::{mean_sd, state_name, BandRow, FailureRecord, MetricRow, MetricsTable};
pub use rng::NoiseStream;
pub use truth::{simulate_truth, simulate_truth_ct, simulate_truth_dt, DeltaSource, Truth};

#[derive(Debug, Clone, PartialEq)]
pub enum DeltaMode {
    /// Each run holds the parameter at one grid value.
    FixedPerRun(Vec<Vec<f64>>),
    /// Each step draws a fresh parameter from the system's law.
    IidPerStep,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub system: UncertainLinearSystem,
    pub case: Case,
    pub truth_x0: DVector<f64>,
    pub initial: GaussianBelief,
    pub horizon: usize,
    pub delta_mode: DeltaMode,
    pub seeds: Vec<u64>,
    pub filters: Vec<FilterKind>,
    /// Step positions (0-based, `0` is the first measurement) that enter the metrics.
    pub window: Range<usize>,
    /// Chaos order of the continuous-discrete robust filter.
    pub order: u32,
    pub substeps: usize,
}

/// Command-line style overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<usize>,
    pub order: Option<u32>,
    pub horizon: Option<usize>,
}

/// Uniformly spaced values covering a marginal, endpoints included.
/// Gaussian marginals are covered on `mean ± 3σ`.
pub fn marginal_grid(m: &Marginal, points: usize) -> Vec<f64> {
    let (lo, hi) = match *m {
        Marginal::Uniform { lower, upper } => (lower, upper),
        Marginal::Gaussian { mean, stddev } => (mean - 3.0 * stddev, mean + 3.0 * stddev),
        Marginal::Point { value } => return vec![value],
    };
    if points == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Tensor grid of [`marginal_grid`]s, first parameter varying slowest.
pub fn delta_grid(dist: &ParameterDistribution, points: usize) -> Vec<Vec<f64>> {
    let mut grid = vec![Vec::new()];
    for m in dist.marginals() {
        let axis = marginal_grid(m, points);
        grid = grid
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    grid
}

impl ExperimentConfig {
    pub fn from_benchmark(
        cfg: &BenchmarkConfig,
        case: Case,
        overrides: &Overrides,
    ) -> Result<Self> {
        let cs = cfg.case(case)?;
        let horizon = overrides.horizon.unwrap_or(cfg.experiment.horizon);
        let seeds = match overrides.seeds {
            Some(n) => {
                let base = cfg.experiment.seeds.first().copied().unwrap_or(1);
                (0..n as u64).map(|i| base + i).collect()
            }
            None => cfg.experiment.seeds.clone(),
        };
        let delta_mode = match cfg.experiment.delta_mode {
            DeltaModeSetting::Grid { points } => {
                DeltaMode::FixedPerRun(delta_grid(cfg.system.delta_dist(), points))
            }
            DeltaModeSetting::Iid => DeltaMode::IidPerStep,
        };
        let window = match case {
            Case::I => {
                let start = if cfg.experiment.steady_state_start < horizon {
                    cfg.experiment.steady_state_start
                } else {
                    horizon / 2
                };
                start..horizon
            }
            Case::II => 0..horizon,
        };
        let out = Self {
            system: cfg.system.clone(),
            case,
            truth_x0: cs.truth_x0.clone(),
            initial: cs.initial.clone(),
            horizon,
            delta_mode,
            seeds,
            filters: cfg.filter.filters.clone(),
            window,
            order: overrides.order.unwrap_or(cfg.filter.order),
            substeps: cfg.filter.substeps,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("horizon must be >= 1"));
        }
        if let DeltaMode::FixedPerRun(grid) = &self.delta_mode {
            if grid.is_empty() {
                return Err(Error::config("parameter grid is empty"));
            }
            if grid
                .iter()
                .any(|d| d.len() != self.system.delta_dist().dims())
            {
                return Err(Error::config("grid point has the wrong dimension"));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if self.filters.is_empty() {
            return Err(Error::config("at least one filter is required"));
        }
        if self.window.is_empty() || self.window.end > self.horizon {
            return Err(Error::config(format!(
                "metric window {:?} does not fit in horizon {}",
                self.window, self.horizon
            )));
        }
        let n = self.system.state_dim();
        if self.truth_x0.len() != n || self.initial.dim() != n {
            return Err(Error::config(format!(
                "initial conditions must have dimension {n}"
            )));
        }
        if self.substeps == 0 {
            return Err(Error::config("substeps must be >= 1"));
        }
        Ok(())
    }

    /// `(delta index, parameter source)` per grid point, in run order.
    fn sources(&self) -> Vec<(usize, DeltaSource)> {
        match &self.delta_mode {
            DeltaMode::FixedPerRun(grid) => grid
                .iter()
                .enumerate()
                .map(|(i, d)| (i, DeltaSource::Fixed(d.clone())))
                .collect(),
            DeltaMode::IidPerStep => vec![(0, DeltaSource::Iid)],
        }
    }

    pub fn run_count(&self) -> usize {
        self.sources().len() * self.seeds.len()
    }
}

/// Builds the requested filters for `sys` once; they are shared read-only by all runs.
pub fn build_filters(
    sys: &UncertainLinearSystem,
    kinds: &[FilterKind],
    order: u32,
    substeps: usize,
) -> Result<Vec<(FilterKind, Box<dyn Filter>)>> {
    kinds
        .iter()
        .map(|&kind| {
            let f: Box<dyn Filter> = match (kind, sys.time_mode()) {
                (FilterKind::Robust, TimeMode::Discrete) => Box::new(DtRobustFilter::new(sys)?),
                (FilterKind::Nominal, TimeMode::Discrete) => Box::new(NominalDtFilter::new(sys)),
                (FilterKind::Robust, TimeMode::Continuous { sample_period }) => {
                    Box::new(CdRobustFilter::new(sys, order, sample_period, substeps)?)
                }
                (FilterKind::Nominal, TimeMode::Continuous { sample_period }) => {
                    Box::new(NominalCdFilter::new(sys, sample_period, substeps))
                }
            };
            Ok((kind, f))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub step: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterTrace {
    pub filter: FilterKind,
    /// Posterior means after each measurement; shorter than the horizon if the run failed.
    pub estimates: Vec<DVector<f64>>,
    pub failure: Option<RunFailure>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub delta_index: usize,
    pub seed: u64,
    pub truth: Truth,
    pub filters: Vec<FilterTrace>,
}

impl RunTrace {
    pub fn steps(&self) -> usize {
        self.truth.states.len()
    }

    pub fn filter(&self, kind: FilterKind) -> Option<&FilterTrace> {
        self.filters.iter().find(|f| f.filter == kind)
    }

    /// `|x_k - mu_k|` for one filter at step position `k`.
    pub fn abs_error(&self, kind: FilterKind, k: usize) -> Option<DVector<f64>> {
        let est = self.filter(kind)?.estimates.get(k)?;
        Some((&self.truth.states[k] - est).abs())
    }
}

fn run_filter(
    filter: &dyn Filter,
    initial: &GaussianBelief,
    truth: &Truth,
) -> (Vec<DVector<f64>>, Option<RunFailure>) {
    let mut belief = initial.clone();
    let mut estimates = Vec::with_capacity(truth.measurements.len());
    for (k, y) in truth.measurements.iter().enumerate() {
        match filter.step(&belief, y) {
            Ok(next) if next.is_finite() => {
                estimates.push(next.mean.clone());
                belief = next;
            }
            Ok(_) => {
                return (
                    estimates,
                    Some(RunFailure {
                        step: k,
                        message: "non-finite estimate".into(),
                    }),
                )
            }
            Err(e) => {
                return (
                    estimates,
                    Some(RunFailure {
                        step: k,
                        message: e.to_string(),
                    }),
                )
            }
        }
    }
    (estimates, None)
}

/// One simulated plant realization filtered by every filter in the bank.
pub fn run_single(
    cfg: &ExperimentConfig,
    bank: &[(FilterKind, Box<dyn Filter>)],
    delta_index: usize,
    source: &DeltaSource,
    seed: u64,
) -> Result<RunTrace> {
    let mut noise = NoiseStream::new(seed, delta_index as u64);
    let truth = simulate_truth(&cfg.system, source, &cfg.truth_x0, &mut noise, cfg.horizon)?;
    let filters = bank
        .iter()
        .map(|(kind, f)| {
            let start = Instant::now();
            let (estimates, failure) = run_filter(f.as_ref(), &cfg.initial, &truth);
            FilterTrace {
                filter: *kind,
                estimates,
                failure,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            }
        })
        .collect();
    Ok(RunTrace {
        delta_index,
        seed,
        truth,
        filters,
    })
}

pub struct EnsembleResult {
    pub table: MetricsTable,
    pub traces: Vec<RunTrace>,
    pub bands: Vec<BandRow>,
}

/// Runs every (grid point × seed) combination in parallel and reduces the
/// results in (grid index, seed index) order, so the output is independent of
/// scheduling.
pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<EnsembleResult> {
    cfg.validate()?;
    let bank = build_filters(&cfg.system, &cfg.filters, cfg.order, cfg.substeps)?;
    let jobs: Vec<(usize, DeltaSource, u64)> = cfg
        .sources()
        .into_iter()
        .flat_map(|(i, src)| cfg.seeds.iter().map(move |&s| (i, src.clone(), s)))
        .collect();
    let traces = jobs
        .par_iter()
        .map(|(i, src, seed)| run_single(cfg, &bank, *i, src, *seed))
        .collect::<Result<Vec<_>>>()?;
    let table = tabulate(
        &traces,
        &cfg.filters,
        cfg.system.state_dim(),
        cfg.case,
        cfg.window.clone(),
    );
    let bands = bands(&traces, &cfg.filters, cfg.system.state_dim());
    Ok(EnsembleResult {
        table,
        traces,
        bands,
    })
}

/// Pools `|error|` over the window and all successful runs.
pub fn tabulate(
    traces: &[RunTrace],
    filters: &[FilterKind],
    n: usize,
    case: Case,
    window: Range<usize>,
) -> MetricsTable {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &kind in filters {
        let ok: Vec<&RunTrace> = traces
            .iter()
            .filter(|t| t.filter(kind).is_some_and(|f| f.failure.is_none()))
            .collect();
        let wall_ms: f64 = traces
            .iter()
            .filter_map(|t| t.filter(kind))
            .map(|f| f.wall_ms)
            .sum();
        for i in 0..n {
            let errs: Vec<f64> = ok
                .iter()
                .flat_map(|t| {
                    window
                        .clone()
                        .map(move |k| t.abs_error(kind, k).expect("complete run")[i])
                })
                .collect();
            let (mean, sd) = mean_sd(&errs);
            rows.push(MetricRow {
                filter: kind.to_string(),
                state: state_name(i),
                case: case.to_string(),
                mean_abs_err: mean,
                sd_abs_err: sd,
                runs: ok.len(),
                wall_ms,
            });
        }
        for t in traces {
            if let Some(FilterTrace {
                failure: Some(fail),
                ..
            }) = t.filter(kind)
            {
                failures.push(FailureRecord {
                    filter: kind.to_string(),
                    delta_index: t.delta_index,
                    seed: t.seed,
                    step: fail.step,
                    message: fail.message.clone(),
                });
            }
        }
    }
    MetricsTable { rows, failures }
}

/// Per-step mean/SD of `|error|` across successful runs.
pub fn bands(traces: &[RunTrace], filters: &[FilterKind], n: usize) -> Vec<BandRow> {
    let horizon = traces.iter().map(RunTrace::steps).max().unwrap_or(0);
    let mut out = Vec::new();
    for k in 0..horizon {
        for &kind in filters {
            let ok: Vec<DVector<f64>> = traces
                .iter()
                .filter(|t| t.filter(kind).is_some_and(|f| f.failure.is_none()))
                .filter_map(|t| t.abs_error(kind, k))
                .collect();
            for i in 0..n {
                let vals: Vec<f64> = ok.iter().map(|e| e[i]).collect();
                let (mean, sd) = mean_sd(&vals);
                out.push(BandRow {
                    step: k + 1,
                    filter: kind.to_string(),
                    state: state_name(i),
                    mean_abs_err: mean,
                    sd_abs_err: sd,
                    runs: vals.len(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::load_shipped;

    #[test]
    fn grid_endpoints() {
        let g = marginal_grid(
            &Marginal::Uniform {
                lower: -0.3,
                upper: 0.3,
            },
            10,
        );
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], -0.3);
        assert!((g[9] - 0.3).abs() < 1e-15);
        let g = marginal_grid(
            &Marginal::Gaussian {
                mean: 1.0,
                stddev: 0.5,
            },
            3,
        );
        assert_eq!(g, vec![-0.5, 1.0, 2.5]);
        let dist = ParameterDistribution::new(vec![
            Marginal::Uniform {
                lower: 0.0,
                upper: 1.0,
            },
            Marginal::Point { value: 2.0 },
        ])
        .unwrap();
        assert_eq!(delta_grid(&dist, 2), vec![vec![0.0, 2.0], vec![1.0, 2.0]]);
    }

    #[test]
    fn single_run_table_is_trace_statistics() {
        let cfg = load_shipped("benchmark_dt").unwrap();
        let mut exp = ExperimentConfig::from_benchmark(
            &cfg,
            Case::I,
            &Overrides {
                seeds: Some(1),
                horizon: Some(40),
                ..Default::default()
            },
        )
        .unwrap();
        exp.delta_mode = DeltaMode::FixedPerRun(vec![vec![0.1]]);
        exp.filters = vec![FilterKind::Nominal];
        let res = run_ensemble(&exp).unwrap();
        assert_eq!(exp.window, 20..40);
        let t = &res.traces[0];
        let errs: Vec<f64> = (20..40)
            .map(|k| t.abs_error(FilterKind::Nominal, k).unwrap()[1])
            .collect();
        let (m, s) = mean_sd(&errs);
        assert_eq!(res.table.mean(FilterKind::Nominal, 1), m);
        assert_eq!(res.table.sd(FilterKind::Nominal, 1), s);
        assert_eq!(res.table.get(FilterKind::Nominal, 1).unwrap().runs, 1);
        assert!(res.bands.iter().all(|b| b.sd_abs_err == 0.0));
    }

    #[test]
    fn ensemble_is_deterministic() {
        let cfg = load_shipped("benchmark_ct").unwrap();
        let exp = ExperimentConfig::from_benchmark(
            &cfg,
            Case::II,
            &Overrides {
                seeds: Some(3),
                horizon: Some(20),
                order: Some(2),
            },
        )
        .unwrap();
        let a = run_ensemble(&exp).unwrap();
        let b = run_ensemble(&exp).unwrap();
        let mut ta = a.table.clone();
        let mut tb = b.table.clone();
        ta.zero_timing();
        tb.zero_timing();
        assert_eq!(ta, tb);
        assert_eq!(a.bands, b.bands);
        assert_eq!(a.traces.len(), 30);
        assert_eq!((a.traces[4].delta_index, a.traces[4].seed), (1, 2));
    }

    #[test]
    fn divergence_is_recorded_not_fatal() {
        struct Exploding;
        impl Filter for Exploding {
            fn predict(&self, p: &GaussianBelief) -> Result<GaussianBelief> {
                Ok(p.clone())
            }
            fn update(&self, p: &GaussianBelief, _y: &DVector<f64>) -> Result<GaussianBelief> {
                let mut out = p.clone();
                out.mean[0] = f64::NAN;
                Ok(out)
            }
        }
        let cfg = load_shipped("benchmark_dt").unwrap();
        let exp = ExperimentConfig::from_benchmark(
            &cfg,
            Case::II,
            &Overrides {
                seeds: Some(1),
                horizon: Some(5),
                ..Default::default()
            },
        )
        .unwrap();
        let bank: Vec<(FilterKind, Box<dyn Filter>)> =
            vec![(FilterKind::Robust, Box::new(Exploding))];
        let run = run_single(&exp, &bank, 0, &DeltaSource::Fixed(vec![0.0]), 1).unwrap();
        let table = tabulate(&[run], &[FilterKind::Robust], 2, Case::II, 0..5);
        assert_eq!(table.failures.len(), 1);
        assert_eq!(table.failures[0].step, 0);
        assert_eq!(table.get(FilterKind::Robust, 0).unwrap().runs, 0);
    }
}
