//! Benchmark configuration files.
//!
//! A config is a TOML document with a `[system]` table (matrices as nested
//! arrays, `A`/`B` entries either numbers or polynomial strings in
//! `d1..dN`), one `[[parameters]]` entry per uncertain parameter, optional
//! `[filter]` and `[experiment]` tables, and initial conditions under
//! `[cases.I]` / `[cases.II]`. See `configs/` for the shipped benchmarks.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chaos::{Marginal, ParameterDistribution, Polynomial};
use crate::error::{Error, Result};
use crate::filter::FilterKind;
use crate::hybrid::default_substeps;
use crate::system::{GaussianBelief, MatrixPolynomial, TimeMode, UncertainLinearSystem};

pub const DEFAULT_ORDER: u32 = 4;
pub const DEFAULT_HORIZON: usize = 200;
pub const DEFAULT_SEEDS: u64 = 50;
pub const DEFAULT_GRID_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Case {
    /// Zero initial mean; errors measured at steady state.
    I,
    /// Nonzero initial state; errors measured over the whole transient.
    II,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::I => "I",
            Case::II => "II",
        })
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "i" | "1" => Ok(Case::I),
            "II" | "ii" | "2" => Ok(Case::II),
            other => Err(Error::config(format!(
                "unknown case '{other}' (expected I or II)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSettings {
    /// Chaos order of the hybrid robust filter.
    pub order: u32,
    /// RK4 substeps per measurement interval (continuous systems).
    pub substeps: usize,
    pub filters: Vec<FilterKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaModeSetting {
    /// Parameter held fixed per run on a uniformly spaced grid of this many points per dimension.
    Grid { points: usize },
    /// Parameter redrawn every step / interval.
    Iid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSettings {
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub delta_mode: DeltaModeSetting,
    /// Case I aggregation window is `[steady_state_start, horizon)` over 0-based step positions.
    pub steady_state_start: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseSettings {
    pub truth_x0: DVector<f64>,
    pub initial: GaussianBelief,
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub system: UncertainLinearSystem,
    pub filter: FilterSettings,
    pub experiment: ExperimentSettings,
    pub cases: BTreeMap<Case, CaseSettings>,
}

impl BenchmarkConfig {
    pub fn case(&self, case: Case) -> Result<&CaseSettings> {
        self.cases
            .get(&case)
            .ok_or_else(|| Error::config(format!("config has no [cases.{case}] table")))
    }

    /// One-line summary, e.g. `DT system, n=2, δ ~ U(-0.3,0.3)`.
    pub fn summary(&self) -> String {
        let mode = match self.system.time_mode() {
            TimeMode::Discrete => "DT".to_string(),
            TimeMode::Continuous { sample_period } => format!("CT (dt={sample_period})"),
        };
        format!(
            "{mode} system, n={}, δ ~ {}",
            self.system.state_dim(),
            self.system.delta_dist().describe()
        )
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&RawConfig::from(self)).expect("config serializes")
    }
}

// ---- raw document ----------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Entry {
    Num(f64),
    Expr(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    time: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sample_period: Option<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<Entry>>,
    #[serde(rename = "B")]
    b: Vec<Vec<Entry>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    substeps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    filters: Option<Vec<FilterKind>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum SeedSpec {
    Count(u64),
    List(Vec<u64>),
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seeds: Option<SeedSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed_base: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta_mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    steady_state_start: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    truth_x0: Vec<f64>,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: RawSystem,
    parameters: Vec<Marginal>,
    #[serde(default)]
    filter: RawFilter,
    #[serde(default)]
    experiment: RawExperiment,
    #[serde(default)]
    cases: BTreeMap<String, RawCase>,
}

fn key_err(key: &str, msg: impl fmt::Display) -> Error {
    Error::parse(key, msg.to_string())
}

fn dense(key: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(key_err(key, "matrix must be nonempty"));
    }
    if rows.iter().any(|row| row.len() != c) {
        return Err(key_err(key, "matrix rows have different lengths"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(key_err(key, "matrix entries must be finite"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn poly_matrix(key: &str, rows: &[Vec<Entry>], dims: usize) -> Result<MatrixPolynomial> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(key_err(key, "matrix must be nonempty"));
    }
    if rows.iter().any(|row| row.len() != c) {
        return Err(key_err(key, "matrix rows have different lengths"));
    }
    let mut entries = Vec::with_capacity(r * c);
    for (i, row) in rows.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            let p = match e {
                Entry::Num(v) if v.is_finite() => Polynomial::constant(dims, *v),
                Entry::Num(_) => {
                    return Err(key_err(&format!("{key}[{i}][{j}]"), "non-finite entry"))
                }
                Entry::Expr(s) => Polynomial::parse(s, dims)
                    .map_err(|e| key_err(&format!("{key}[{i}][{j}]"), e))?,
            };
            entries.push(p);
        }
    }
    MatrixPolynomial::new(r, c, entries)
}

fn to_entries(m: &MatrixPolynomial) -> Vec<Vec<Entry>> {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| {
                    let p = m.entry(i, j);
                    if p.is_constant() {
                        Entry::Num(p.coeffs()[0])
                    } else {
                        Entry::Expr(p.to_string())
                    }
                })
                .collect()
        })
        .collect()
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Parses and fully validates a config document.
pub fn parse_system(text: &str) -> Result<BenchmarkConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::parse("config", e.to_string().trim_end()))?;
    let dist =
        ParameterDistribution::new(raw.parameters.clone()).map_err(|e| key_err("parameters", e))?;
    let dims = dist.dims();

    let s = &raw.system;
    let a = poly_matrix("system.A", &s.a, dims)?;
    let b = poly_matrix("system.B", &s.b, dims)?;
    let c = dense("system.C", &s.c)?;
    let q = dense("system.Q", &s.q)?;
    let r = dense("system.R", &s.r)?;
    let time_mode = match s.time.as_str() {
        "discrete" | "dt" => {
            if s.sample_period.is_some() {
                return Err(key_err(
                    "system.sample_period",
                    "only valid for continuous systems",
                ));
            }
            TimeMode::Discrete
        }
        "continuous" | "ct" => TimeMode::Continuous {
            sample_period: s.sample_period.ok_or_else(|| {
                key_err("system.sample_period", "required for continuous systems")
            })?,
        },
        other => {
            return Err(key_err(
                "system.time",
                format!("expected \"discrete\" or \"continuous\", got \"{other}\""),
            ))
        }
    };
    let system =
        UncertainLinearSystem::new(a, b, c, q, r, dist, time_mode).map_err(|e| match e {
            Error::Config(msg) => key_err("system", msg),
            other => other,
        })?;

    let substeps = match (raw.filter.substeps, time_mode) {
        (Some(0), _) => return Err(key_err("filter.substeps", "must be >= 1")),
        (Some(k), _) => k,
        (None, TimeMode::Continuous { sample_period }) => default_substeps(sample_period),
        (None, TimeMode::Discrete) => 1,
    };
    let filters = raw
        .filter
        .filters
        .clone()
        .unwrap_or_else(|| vec![FilterKind::Robust, FilterKind::Nominal]);
    if filters.is_empty() {
        return Err(key_err("filter.filters", "at least one filter is required"));
    }
    let filter = FilterSettings {
        order: raw.filter.order.unwrap_or(DEFAULT_ORDER),
        substeps,
        filters,
    };

    let e = &raw.experiment;
    let horizon = e.horizon.unwrap_or(DEFAULT_HORIZON);
    if horizon == 0 {
        return Err(key_err("experiment.horizon", "must be >= 1"));
    }
    let base = e.seed_base.unwrap_or(1);
    let seeds = match &e.seeds {
        None => (0..DEFAULT_SEEDS).map(|i| base + i).collect(),
        Some(SeedSpec::Count(n)) => (0..*n).map(|i| base + i).collect(),
        Some(SeedSpec::List(v)) => v.clone(),
    };
    if seeds.is_empty() {
        return Err(key_err("experiment.seeds", "at least one seed is required"));
    }
    let delta_mode = match e.delta_mode.as_deref().unwrap_or("grid") {
        "grid" => {
            let points = e.grid_points.unwrap_or(DEFAULT_GRID_POINTS);
            if points == 0 {
                return Err(key_err("experiment.grid_points", "grid must be nonempty"));
            }
            DeltaModeSetting::Grid { points }
        }
        "iid" => DeltaModeSetting::Iid,
        other => {
            return Err(key_err(
                "experiment.delta_mode",
                format!("expected \"grid\" or \"iid\", got \"{other}\""),
            ))
        }
    };
    let steady_state_start = e.steady_state_start.unwrap_or(horizon / 2);
    if steady_state_start >= horizon {
        return Err(key_err(
            "experiment.steady_state_start",
            "must be below the horizon",
        ));
    }
    let experiment = ExperimentSettings {
        horizon,
        seeds,
        delta_mode,
        steady_state_start,
    };

    let n = system.state_dim();
    let mut cases = BTreeMap::new();
    for (name, rc) in &raw.cases {
        let key = format!("cases.{name}");
        let case: Case = name.parse().map_err(|e| key_err(&key, e))?;
        if rc.truth_x0.len() != n || rc.mean.len() != n {
            return Err(key_err(
                &key,
                format!("truth_x0 and mean must have length {n}"),
            ));
        }
        let cov = dense(&format!("{key}.cov"), &rc.cov)?;
        let initial = GaussianBelief::new(DVector::from_vec(rc.mean.clone()), cov)
            .map_err(|e| key_err(&key, e))?;
        cases.insert(
            case,
            CaseSettings {
                truth_x0: DVector::from_vec(rc.truth_x0.clone()),
                initial,
            },
        );
    }

    Ok(BenchmarkConfig {
        system,
        filter,
        experiment,
        cases,
    })
}

impl From<&BenchmarkConfig> for RawConfig {
    fn from(cfg: &BenchmarkConfig) -> Self {
        let sys = &cfg.system;
        let (time, sample_period) = match sys.time_mode() {
            TimeMode::Discrete => ("discrete".to_string(), None),
            TimeMode::Continuous { sample_period } => {
                ("continuous".to_string(), Some(sample_period))
            }
        };
        let (delta_mode, grid_points) = match cfg.experiment.delta_mode {
            DeltaModeSetting::Grid { points } => ("grid".to_string(), Some(points)),
            DeltaModeSetting::Iid => ("iid".to_string(), None),
        };
        RawConfig {
            system: RawSystem {
                time,
                sample_period,
                a: to_entries(sys.a_poly()),
                b: to_entries(sys.b_poly()),
                c: to_rows(sys.c()),
                q: to_rows(sys.q()),
                r: to_rows(sys.r()),
            },
            parameters: sys.delta_dist().marginals().to_vec(),
            filter: RawFilter {
                order: Some(cfg.filter.order),
                substeps: Some(cfg.filter.substeps),
                filters: Some(cfg.filter.filters.clone()),
            },
            experiment: RawExperiment {
                horizon: Some(cfg.experiment.horizon),
                seeds: Some(SeedSpec::List(cfg.experiment.seeds.clone())),
                seed_base: None,
                delta_mode: Some(delta_mode),
                grid_points,
                steady_state_start: Some(cfg.experiment.steady_state_start),
            },
            cases: cfg
                .cases
                .iter()
                .map(|(case, cs)| {
                    (
                        case.to_string(),
                        RawCase {
                            truth_x0: cs.truth_x0.iter().copied().collect(),
                            mean: cs.initial.mean.iter().copied().collect(),
                            cov: to_rows(&cs.initial.cov),
                        },
                    )
                })
                .collect(),
        }
    }
}
