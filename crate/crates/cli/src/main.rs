use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use log::info;

use robust_kalman::benchmarks;
use robust_kalman::compare::{compare, Column, CompareOptions};
use robust_kalman::config::{parse_system, BenchmarkConfig, Case};
use robust_kalman::harness::{run_ensemble, ExperimentConfig, Overrides};
use robust_kalman::io::{read_metrics, write_outputs, OutputOptions};
use robust_kalman::{Error, Result};

const EXIT_REGRESSION: u8 = 3;

#[derive(Parser)]
#[command(name = "rkf", version, about = "Robust Kalman filter benchmarks")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a config and report what it describes.
    Validate {
        /// Config file, or a shipped benchmark name (benchmark_dt, benchmark_ct).
        config: String,
    },
    /// Run a benchmark ensemble and write metrics, bands and traces.
    Run {
        /// Config file, or a shipped benchmark name (benchmark_dt, benchmark_ct).
        config: String,
        #[arg(long, default_value = "I")]
        case: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Number of noise seeds (consecutive, starting at the config's first seed).
        #[arg(long)]
        seeds: Option<usize>,
        /// Chaos order of the continuous-discrete robust filter.
        #[arg(long)]
        order: Option<u32>,
        #[arg(long)]
        horizon: Option<usize>,
        /// Write wall_ms = 0 so reruns produce byte-identical metrics.
        #[arg(long)]
        no_timing: bool,
        /// Skip the per-run trace and measurement files.
        #[arg(long)]
        no_traces: bool,
    },
    /// Compare two metrics files (csv or json) cell by cell.
    Compare {
        baseline: PathBuf,
        candidate: PathBuf,
        /// Relative increase tolerated before a watched cell counts as a regression.
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
        /// Columns to watch.
        #[arg(long, value_delimiter = ',', default_value = "mean_abs_err,sd_abs_err")]
        watch: Vec<String>,
        /// Only use this filter's rows from the baseline.
        #[arg(long)]
        baseline_filter: Option<String>,
        /// Only use this filter's rows from the candidate.
        #[arg(long)]
        candidate_filter: Option<String>,
    },
}

fn load_config(spec: &str) -> Result<BenchmarkConfig> {
    let path = Path::new(spec);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        return parse_system(&text);
    }
    match benchmarks::shipped(spec) {
        Some(text) => parse_system(text),
        None => Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "no such config file or shipped benchmark",
            ),
        }),
    }
}

fn validate(config: &str) -> Result<u8> {
    let cfg = load_config(config)?;
    println!("OK: {}", cfg.summary());
    Ok(0)
}

fn run(
    config: &str,
    case: &str,
    out: &Path,
    overrides: Overrides,
    no_timing: bool,
    no_traces: bool,
) -> Result<u8> {
    let cfg = load_config(config)?;
    let case: Case = case.parse()?;
    let exp = ExperimentConfig::from_benchmark(&cfg, case, &overrides)?;
    info!(
        "{}: case {case}, {} runs x {} steps",
        cfg.summary(),
        exp.run_count(),
        exp.horizon
    );
    let start = Instant::now();
    let mut result = run_ensemble(&exp)?;
    info!("ensemble finished in {:.2?}", start.elapsed());
    if no_timing {
        result.table.zero_timing();
    }
    let written = write_outputs(out, &result, OutputOptions { traces: !no_traces })?;
    print!("{}", result.table.render(case));
    println!("wrote {} files to {}", written.len(), out.display());
    Ok(if result.table.failures.is_empty() {
        0
    } else {
        2
    })
}

fn compare_cmd(
    baseline: &Path,
    candidate: &Path,
    tolerance: f64,
    watch: &[String],
    baseline_filter: Option<String>,
    candidate_filter: Option<String>,
) -> Result<u8> {
    let opts = CompareOptions {
        tolerance,
        watch: watch
            .iter()
            .map(|w| w.parse())
            .collect::<Result<Vec<Column>>>()?,
        baseline_filter,
        candidate_filter,
    };
    let report = compare(&read_metrics(baseline)?, &read_metrics(candidate)?, &opts)?;
    print!("{report}");
    if report.regressed() {
        eprintln!("regression beyond tolerance {tolerance}");
        Ok(EXIT_REGRESSION)
    } else {
        Ok(0)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match cli.command {
        Command::Validate { config } => validate(&config),
        Command::Run {
            config,
            case,
            out,
            seeds,
            order,
            horizon,
            no_timing,
            no_traces,
        } => run(
            &config,
            &case,
            &out,
            Overrides {
                seeds,
                order,
                horizon,
            },
            no_timing,
            no_traces,
        ),
        Command::Compare {
            baseline,
            candidate,
            tolerance,
            watch,
            baseline_filter,
            candidate_filter,
        } => compare_cmd(
            &baseline,
            &candidate,
            tolerance,
            &watch,
            baseline_filter,
            candidate_filter,
        ),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
