//! CSV / JSON outputs of an ensemble run and readers for them.
//!
//! * `metrics.csv`: `filter,state,case,mean_abs_err,sd_abs_err,runs,wall_ms`
//! * `metrics.json`: the same rows plus any recorded run failures
//! * `bands.csv`: `step,filter,state,mean_abs_err,sd_abs_err,runs`
//! * `trace_<delta>_<seed>.csv`: `step,filter,state,truth,estimate,abs_err`
//! * `meas_<delta>_<seed>.csv`: `step,output,value`
//!
//! Steps are 1-based measurement indices. Floats are written in shortest
//! round-trip form, so every file reads back bit-exactly.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{state_name, BandRow, EnsembleResult, MetricRow, MetricsTable, RunTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub filter: String,
    pub state: String,
    pub truth: f64,
    pub estimate: f64,
    pub abs_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRow {
    pub step: usize,
    pub output: String,
    pub value: f64,
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn write_metrics_csv(path: &Path, table: &MetricsTable) -> Result<()> {
    write_rows(path, &table.rows)
}

pub fn read_metrics_csv(path: &Path) -> Result<MetricsTable> {
    Ok(MetricsTable {
        rows: read_rows::<MetricRow>(path)?,
        failures: Vec::new(),
    })
}

pub fn write_metrics_json(path: &Path, table: &MetricsTable) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(file, table).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_metrics_json(path: &Path) -> Result<MetricsTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `metrics.csv` or `metrics.json` by extension.
pub fn read_metrics(path: &Path) -> Result<MetricsTable> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => read_metrics_json(path),
        _ => read_metrics_csv(path),
    }
}

pub fn write_bands_csv(path: &Path, bands: &[BandRow]) -> Result<()> {
    write_rows(path, bands)
}

pub fn read_bands_csv(path: &Path) -> Result<Vec<BandRow>> {
    read_rows(path)
}

pub fn trace_rows(trace: &RunTrace) -> Vec<TraceRow> {
    let mut rows = Vec::new();
    for k in 0..trace.steps() {
        let x = &trace.truth.states[k];
        for f in &trace.filters {
            let Some(est) = f.estimates.get(k) else {
                continue;
            };
            for i in 0..x.len() {
                rows.push(TraceRow {
                    step: k + 1,
                    filter: f.filter.to_string(),
                    state: state_name(i),
                    truth: x[i],
                    estimate: est[i],
                    abs_err: (x[i] - est[i]).abs(),
                });
            }
        }
    }
    rows
}

pub fn measurement_rows(trace: &RunTrace) -> Vec<MeasurementRow> {
    trace
        .truth
        .measurements
        .iter()
        .enumerate()
        .flat_map(|(k, y)| {
            y.iter().enumerate().map(move |(j, &v)| MeasurementRow {
                step: k + 1,
                output: format!("y{}", j + 1),
                value: v,
            })
        })
        .collect()
}

pub fn write_trace_csv(path: &Path, trace: &RunTrace) -> Result<()> {
    write_rows(path, &trace_rows(trace))
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    read_rows(path)
}

pub fn read_measurements_csv(path: &Path) -> Result<Vec<MeasurementRow>> {
    read_rows(path)
}

pub fn trace_file_name(trace: &RunTrace) -> String {
    format!("trace_{}_{}.csv", trace.delta_index, trace.seed)
}

pub fn measurement_file_name(trace: &RunTrace) -> String {
    format!("meas_{}_{}.csv", trace.delta_index, trace.seed)
}

#[derive(Debug, Clone, Copy)]
pub struct OutputOptions {
    pub traces: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self { traces: true }
    }
}

/// Writes every output of an ensemble into `dir` (created if missing) and
/// returns the paths written.
pub fn write_outputs(
    dir: &Path,
    result: &EnsembleResult,
    opts: OutputOptions,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let p = dir.join("metrics.csv");
    write_metrics_csv(&p, &result.table)?;
    written.push(p);
    let p = dir.join("metrics.json");
    write_metrics_json(&p, &result.table)?;
    written.push(p);
    let p = dir.join("bands.csv");
    write_bands_csv(&p, &result.bands)?;
    written.push(p);
    if opts.traces {
        for t in &result.traces {
            let p = dir.join(trace_file_name(t));
            write_trace_csv(&p, t)?;
            written.push(p);
            let p = dir.join(measurement_file_name(t));
            write_rows(&p, &measurement_rows(t))?;
            written.push(p);
        }
    }
    Ok(written)
}
