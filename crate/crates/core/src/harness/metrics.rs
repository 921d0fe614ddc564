//! Error statistics over ensembles of runs.

use serde::{Deserialize, Serialize};

use crate::config::Case;
use crate::filter::FilterKind;

/// Mean and population standard deviation (an empty slice gives NaN, one sample gives SD 0).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Name of state component `i` (0-based) as it appears in outputs: `x1`, `x2`, ...
pub fn state_name(i: usize) -> String {
    format!("x{}", i + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub filter: String,
    pub state: String,
    pub case: String,
    pub mean_abs_err: f64,
    pub sd_abs_err: f64,
    pub runs: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub filter: String,
    pub delta_index: usize,
    pub seed: u64,
    pub step: usize,
    pub message: String,
}

/// One row per filter × state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricRow>,
    #[serde(default)]
    pub failures: Vec<FailureRecord>,
}

impl MetricsTable {
    pub fn get(&self, filter: FilterKind, state: usize) -> Option<&MetricRow> {
        let state = state_name(state);
        self.rows
            .iter()
            .find(|r| r.filter == filter.as_str() && r.state == state)
    }

    pub fn mean(&self, filter: FilterKind, state: usize) -> f64 {
        self.get(filter, state).map_or(f64::NAN, |r| r.mean_abs_err)
    }

    pub fn sd(&self, filter: FilterKind, state: usize) -> f64 {
        self.get(filter, state).map_or(f64::NAN, |r| r.sd_abs_err)
    }

    pub fn zero_timing(&mut self) {
        for r in &mut self.rows {
            r.wall_ms = 0.0;
        }
    }

    /// Plain-text table: one line per filter, `mean / SD` per state.
    pub fn render(&self, case: Case) -> String {
        let states: Vec<&str> = {
            let mut s: Vec<&str> = self.rows.iter().map(|r| r.state.as_str()).collect();
            s.dedup();
            s.sort();
            s.dedup();
            s
        };
        let mut filters: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !filters.contains(&r.filter.as_str()) {
                filters.push(&r.filter);
            }
        }
        let mut out = format!("Case {case}: mean / SD of absolute error\n");
        out.push_str(&format!("{:<10}", "filter"));
        for s in &states {
            out.push_str(&format!("{:>22}", s));
        }
        out.push_str(&format!("{:>10}{:>12}\n", "runs", "wall_ms"));
        for f in filters {
            out.push_str(&format!("{f:<10}"));
            let mut runs = 0;
            let mut wall = 0.0;
            for s in &states {
                match self.rows.iter().find(|r| r.filter == f && r.state == *s) {
                    Some(r) => {
                        out.push_str(&format!(
                            "{:>22}",
                            format!("{:.4} / {:.4}", r.mean_abs_err, r.sd_abs_err)
                        ));
                        runs = r.runs;
                        wall = r.wall_ms;
                    }
                    None => out.push_str(&format!("{:>22}", "-")),
                }
            }
            out.push_str(&format!("{runs:>10}{wall:>12.1}\n"));
        }
        if !self.failures.is_empty() {
            out.push_str(&format!("{} run(s) failed\n", self.failures.len()));
        }
        out
    }
}

/// Per-step mean and SD of the absolute error across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub step: usize,
    pub filter: String,
    pub state: String,
    pub mean_abs_err: f64,
    pub sd_abs_err: f64,
    pub runs: usize,
}
