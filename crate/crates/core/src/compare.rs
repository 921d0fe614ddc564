//! Cell-by-cell comparison of two metrics tables.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::harness::{MetricRow, MetricsTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Column {
    MeanAbsErr,
    SdAbsErr,
}

impl Column {
    pub fn name(self) -> &'static str {
        match self {
            Column::MeanAbsErr => "mean_abs_err",
            Column::SdAbsErr => "sd_abs_err",
        }
    }

    fn get(self, row: &MetricRow) -> f64 {
        match self {
            Column::MeanAbsErr => row.mean_abs_err,
            Column::SdAbsErr => row.sd_abs_err,
        }
    }
}

impl std::str::FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_abs_err" | "mean" => Ok(Column::MeanAbsErr),
            "sd_abs_err" | "sd" => Ok(Column::SdAbsErr),
            other => Err(Error::config(format!("unknown metrics column '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    /// Relative increase over the baseline tolerated before a watched cell counts as regressed.
    pub tolerance: f64,
    pub watch: Vec<Column>,
    /// Restrict the baseline side to one filter (e.g. compare nominal against robust in one file).
    pub baseline_filter: Option<String>,
    pub candidate_filter: Option<String>,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            tolerance: 0.05,
            watch: vec![Column::MeanAbsErr, Column::SdAbsErr],
            baseline_filter: None,
            candidate_filter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellDiff {
    pub filter: String,
    pub state: String,
    pub case: String,
    pub column: Column,
    pub baseline: f64,
    pub candidate: f64,
    pub delta: f64,
    pub ratio: f64,
    pub regressed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub cells: Vec<CellDiff>,
}

impl CompareReport {
    pub fn regressed(&self) -> bool {
        self.cells.iter().any(|c| c.regressed)
    }

    pub fn cell(&self, state: &str, column: Column) -> Option<&CellDiff> {
        self.cells
            .iter()
            .find(|c| c.state == state && c.column == column)
    }
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<18}{:<7}{:<6}{:<14}{:>14}{:>14}{:>14}{:>10}",
            "filter", "state", "case", "column", "baseline", "candidate", "delta", "ratio"
        )?;
        for c in &self.cells {
            writeln!(
                f,
                "{:<18}{:<7}{:<6}{:<14}{:>14.6}{:>14.6}{:>+14.6}{:>10.4}{}",
                c.filter,
                c.state,
                c.case,
                c.column.name(),
                c.baseline,
                c.candidate,
                c.delta,
                c.ratio,
                if c.regressed { "  REGRESSED" } else { "" }
            )?;
        }
        Ok(())
    }
}

type Key = (String, String, String);

fn index<'a>(
    table: &'a MetricsTable,
    only: Option<&str>,
    keep_filter: bool,
) -> Result<BTreeMap<Key, &'a MetricRow>> {
    let mut out = BTreeMap::new();
    for r in &table.rows {
        if only.is_some_and(|f| f != r.filter) {
            continue;
        }
        let filter = if keep_filter {
            r.filter.clone()
        } else {
            String::new()
        };
        if out
            .insert((filter, r.state.clone(), r.case.clone()), r)
            .is_some()
        {
            return Err(Error::Schema(format!(
                "duplicate row for filter {} state {} case {}",
                r.filter, r.state, r.case
            )));
        }
    }
    if out.is_empty() {
        return Err(Error::Schema(match only {
            Some(f) => format!("no rows for filter '{f}'"),
            None => "metrics table is empty".into(),
        }));
    }
    Ok(out)
}

/// Compares `candidate` against `baseline`. Cells are matched on
/// (filter, state, case), or on (state, case) when a filter is selected on
/// either side. Both sides must cover exactly the same cells.
pub fn compare(
    baseline: &MetricsTable,
    candidate: &MetricsTable,
    opts: &CompareOptions,
) -> Result<CompareReport> {
    let keep_filter = opts.baseline_filter.is_none() && opts.candidate_filter.is_none();
    let base = index(baseline, opts.baseline_filter.as_deref(), keep_filter)?;
    let cand = index(candidate, opts.candidate_filter.as_deref(), keep_filter)?;
    let describe = |m: &BTreeMap<Key, &MetricRow>| {
        m.keys()
            .map(|(f, s, c)| {
                if f.is_empty() {
                    format!("{s}/{c}")
                } else {
                    format!("{f}/{s}/{c}")
                }
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    if base.keys().ne(cand.keys()) {
        return Err(Error::Schema(format!(
            "tables cover different cells: baseline [{}] vs candidate [{}]",
            describe(&base),
            describe(&cand)
        )));
    }
    let mut cells = Vec::new();
    for (key, b) in &base {
        let c = cand[key];
        let filter = if keep_filter {
            b.filter.clone()
        } else {
            format!("{}->{}", b.filter, c.filter)
        };
        for &column in &opts.watch {
            let (bv, cv) = (column.get(b), column.get(c));
            let ratio = if bv == cv { 1.0 } else { cv / bv };
            cells.push(CellDiff {
                filter: filter.clone(),
                state: key.1.clone(),
                case: key.2.clone(),
                column,
                baseline: bv,
                candidate: cv,
                delta: cv - bv,
                ratio,
                regressed: cv.is_nan() || cv > bv * (1.0 + opts.tolerance) + 1e-12,
            });
        }
    }
    Ok(CompareReport { cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(filter: &str, state: &str, mean: f64, sd: f64) -> MetricRow {
        MetricRow {
            filter: filter.into(),
            state: state.into(),
            case: "I".into(),
            mean_abs_err: mean,
            sd_abs_err: sd,
            runs: 10,
            wall_ms: 0.0,
        }
    }

    fn table() -> MetricsTable {
        MetricsTable {
            rows: vec![
                row("robust", "x1", 0.3, 0.2),
                row("robust", "x2", 3.0, 2.0),
                row("nominal", "x1", 0.5, 0.4),
                row("nominal", "x2", 9.0, 5.0),
            ],
            failures: vec![],
        }
    }

    #[test]
    fn self_compare_is_clean() {
        let r = compare(&table(), &table(), &CompareOptions::default()).unwrap();
        assert_eq!(r.cells.len(), 8);
        assert!(r.cells.iter().all(|c| c.delta == 0.0 && c.ratio == 1.0));
        assert!(!r.regressed());
    }

    #[test]
    fn robust_against_nominal() {
        let opts = CompareOptions {
            baseline_filter: Some("nominal".into()),
            candidate_filter: Some("robust".into()),
            ..Default::default()
        };
        let r = compare(&table(), &table(), &opts).unwrap();
        for s in ["x1", "x2"] {
            assert!(r.cell(s, Column::MeanAbsErr).unwrap().ratio < 1.0);
        }
        assert!(!r.regressed());
        let reverse = CompareOptions {
            baseline_filter: Some("robust".into()),
            candidate_filter: Some("nominal".into()),
            ..Default::default()
        };
        assert!(compare(&table(), &table(), &reverse).unwrap().regressed());
    }

    #[test]
    fn state_mismatch_is_schema_error() {
        let mut other = table();
        other.rows.retain(|r| r.state == "x1");
        let err = compare(&table(), &other, &CompareOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }
}
