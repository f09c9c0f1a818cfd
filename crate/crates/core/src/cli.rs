//! Command-line front end: `fit`, `simulate` and `trace`.
//!
//! Exit codes: 0 on success, 1 for input or usage errors, 2 when the
//! estimation itself fails numerically.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;
use serde::Serialize;

use crate::error::{DataError, Error};
use crate::estimator::{fit, EstimateResult, FitOptions, VarianceAt};
use crate::model::{validate_dataset, Dataset, ParamVector, RawRow, SmoothingMatrix};
use crate::objectives::{smoothed_objective_with, step_objective};
use crate::simulation::{format_csv, format_table, run_study, Design, DesignSpec};

/// Version of the JSON fit report layout.
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "rankcorr",
    version,
    about = "Smoothed maximum rank correlation estimation with sandwich standard errors",
    args_override_self = true
)]
pub struct CliConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model to a CSV file and write a JSON report.
    Fit(FitArgs),
    /// Run a Monte Carlo study on one of the built-in designs.
    Simulate(SimulateArgs),
    /// Write the step and smoothed objectives over a grid of θ (d = 1).
    Trace(TraceArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Response (or observed time) column.
    #[arg(long)]
    pub response: String,
    /// Covariate columns with free coefficients, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub covariates: Vec<String>,
    /// Covariate whose coefficient is fixed at 1. Defaults to the last
    /// entry of --covariates.
    #[arg(long)]
    pub anchor: Option<String>,
    /// Event indicator column (1 = event observed, 0 = censored).
    #[arg(long)]
    pub censor: Option<String>,
    /// Covariates are risk factors: a larger index means a shorter time.
    /// Negates every covariate before fitting.
    #[arg(long)]
    pub risk_score: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VarianceAtArg {
    /// At the step-objective maximizer in every iteration.
    Step,
    /// At the previous smoothed estimate.
    Current,
}

#[derive(Debug, Args)]
pub struct OptionArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sigma_tol: Option<f64>,
    #[arg(long)]
    pub theta_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Where the sandwich is evaluated in each iteration.
    #[arg(long, value_enum, default_value = "step")]
    pub variance_at: VarianceAtArg,
}

impl OptionArgs {
    fn fit_options(&self) -> FitOptions {
        let mut o = FitOptions::default();
        if let Some(v) = self.seed {
            o.seed = v;
        }
        if let Some(v) = self.sigma_tol {
            o.sigma_tol = v;
        }
        if let Some(v) = self.theta_tol {
            o.theta_tol = v;
        }
        if let Some(v) = self.max_iters {
            o.max_outer_iters = v;
        }
        if let Some(v) = self.restarts {
            o.optimizer_restarts = v;
        }
        o.variance_at = match self.variance_at {
            VarianceAtArg::Step => VarianceAt::StepEstimate,
            VarianceAtArg::Current => VarianceAt::Current,
        };
        o
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[command(flatten)]
    pub options: OptionArgs,
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub design: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[command(flatten)]
    pub options: OptionArgs,
    /// Text table path; CSV and JSON twins are written next to it with
    /// `.csv` and `.json` extensions. Stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[command(flatten)]
    pub options: OptionArgs,
    #[arg(long, default_value_t = 401)]
    pub grid_points: usize,
    /// Half-width of the grid in standard errors around θ̂.
    #[arg(long, default_value_t = 6.0)]
    pub grid_span: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Data(_) => 1,
            Error::Numerical(_) | Error::AllReplicationsFailed { .. } => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        Self::input(e.to_string())
    }
}

/// The dataset read from a CSV file, plus the column names used.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub data: Dataset,
    pub covariates: Vec<String>,
    pub anchor: String,
}

/// Read a CSV file, putting the anchor column last.
pub fn load_csv(args: &DataArgs) -> Result<LoadedData, CliError> {
    let mut covariates = args.covariates.clone();
    let anchor = match &args.anchor {
        Some(a) => {
            if covariates.contains(a) {
                return Err(CliError::input(format!(
                    "anchor column {a:?} must not also be listed in --covariates"
                )));
            }
            a.clone()
        }
        None => {
            if covariates.len() < 2 {
                return Err(CliError::input(
                    "need at least one covariate besides the anchor (give --anchor or two --covariates)",
                ));
            }
            covariates.pop().expect("non-empty")
        }
    };
    let path = args.data.display();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(&args.data)
        .map_err(|e| CliError::input(format!("{path}: {e}")))?;
    let header = reader
        .headers()
        .map_err(|e| CliError::input(format!("{path}: {e}")))?
        .clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::input(format!("{path}: column {name:?} not found in header")))
    };
    let response_col = find(&args.response)?;
    let mut covariate_cols = covariates.iter().map(|c| find(c)).collect::<Result<Vec<_>, _>>()?;
    covariate_cols.push(find(&anchor)?);
    let censor_col = args.censor.as_deref().map(find).transpose()?;

    let mut raw = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::input(format!("{path}: data row {}: {e}", k + 1)))?;
        let cell = |c: usize| record.get(c).unwrap_or("").to_string();
        raw.push(RawRow {
            response: cell(response_col),
            covariates: covariate_cols.iter().map(|&c| cell(c)).collect(),
            event: censor_col.map(cell),
        });
    }
    let mut columns = covariates.clone();
    columns.push(anchor.clone());
    let mut data = validate_dataset(&raw)
        .map_err(|e| CliError::input(format!("{path}: {}", with_column_names(e, &args.response, &columns))))?;
    if args.risk_score {
        data = data.scale_covariates(-1.0)?;
    }
    Ok(LoadedData {
        data,
        covariates,
        anchor,
    })
}

/// Replace positional field labels ("covariate 2") with column names.
fn with_column_names(e: DataError, response: &str, columns: &[String]) -> DataError {
    let rename = |field: String| {
        if field == "response" {
            return format!("column {response:?}");
        }
        field
            .strip_prefix("covariate ")
            .and_then(|k| k.parse::<usize>().ok())
            .and_then(|k| columns.get(k.wrapping_sub(1)))
            .map_or(field.clone(), |name| format!("column {name:?}"))
    };
    match e {
        DataError::NotNumeric { row, field, value } => DataError::NotNumeric {
            row,
            field: rename(field),
            value,
        },
        DataError::NonFinite { row, field } => DataError::NonFinite {
            row,
            field: rename(field),
        },
        other => other,
    }
}

#[derive(Debug, Serialize)]
struct InputDigest {
    n: usize,
    d: usize,
    censoring_rate: f64,
}

#[derive(Debug, Serialize)]
struct FitReport<'a> {
    report_version: u32,
    covariates: &'a [String],
    anchor: &'a str,
    criterion: &'a str,
    theta_hat: &'a [f64],
    theta_mrce: &'a [f64],
    std_errors: &'a [f64],
    /// Row-major.
    cov_hat: Vec<f64>,
    /// Row-major, covariance of √n(θ̂ − θ₀).
    sigma_star: Vec<f64>,
    wald_ci_95: Vec<[f64; 2]>,
    outer_iterations: usize,
    converged: bool,
    objective_at_optimum: f64,
    step_objective: f64,
    sigma_trace: &'a [f64],
    input: InputDigest,
}

fn criterion_label(result: &EstimateResult) -> &'static str {
    match result.criterion {
        crate::model::Criterion::Rank => "rank",
        crate::model::Criterion::PartialRank => "partial_rank",
    }
}

fn write_output(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, contents)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(contents.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::input(format!("cannot write to stdout: {e}")))
        }
    }
}

fn fit_report_json(loaded: &LoadedData, result: &EstimateResult) -> String {
    let report = FitReport {
        report_version: REPORT_VERSION,
        covariates: &loaded.covariates,
        anchor: &loaded.anchor,
        criterion: criterion_label(result),
        theta_hat: result.theta_hat.as_slice(),
        theta_mrce: result.theta_mrce.as_slice(),
        std_errors: &result.std_errors,
        cov_hat: result.cov_hat.iter().copied().collect(),
        sigma_star: result.sigma_star.iter().copied().collect(),
        wald_ci_95: result.wald_ci_95().into_iter().map(|(a, b)| [a, b]).collect(),
        outer_iterations: result.outer_iterations,
        converged: result.converged,
        objective_at_optimum: result.objective_at_optimum,
        step_objective: result.step_objective,
        sigma_trace: &result.sigma_trace,
        input: InputDigest {
            n: loaded.data.n(),
            d: loaded.data.dim(),
            censoring_rate: loaded.data.censoring_rate(),
        },
    };
    let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
    s.push('\n');
    s
}

pub fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let loaded = load_csv(&args.input)?;
    let result = fit(&loaded.data, &args.options.fit_options())?;
    if !result.converged {
        warn!("fit did not converge; the report is from the last iteration");
    }
    write_output(args.out.as_deref(), &fit_report_json(&loaded, &result))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let design: Design = args.design.parse()?;
    let spec = DesignSpec::new(design, args.n)?;
    if args.reps == 0 {
        return Err(CliError::input("--reps must be at least 1"));
    }
    let options = args.options.fit_options();
    let summary = run_study(&spec, args.reps, options.seed, &options)?;
    let table = format_table(&summary);
    match &args.out {
        Some(path) => {
            write_output(Some(path), &table)?;
            write_output(Some(&path.with_extension("csv")), &format_csv(&summary))?;
            let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
            json.push('\n');
            write_output(Some(&path.with_extension("json")), &json)
        }
        None => write_output(None, &table),
    }
}

/// Evenly spaced grid of `points` values centred on `center`.
pub fn trace_grid(center: f64, half_width: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![center],
        _ => (0..points)
            .map(|k| center - half_width + 2.0 * half_width * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

pub fn cmd_trace(args: &TraceArgs) -> Result<(), CliError> {
    let loaded = load_csv(&args.input)?;
    let data = &loaded.data;
    if data.dim() != 1 {
        return Err(CliError::input(format!(
            "trace needs exactly one free coefficient (d = 1), this data has d = {}",
            data.dim()
        )));
    }
    if args.grid_points == 0 {
        return Err(CliError::input("--grid-points must be at least 1"));
    }
    if !(args.grid_span > 0.0 && args.grid_span.is_finite()) {
        return Err(CliError::input("--grid-span must be positive"));
    }
    let result = fit(data, &args.options.fit_options())?;
    let se = result.std_errors[0];
    let half_width = if se > 0.0 && se.is_finite() {
        args.grid_span * se
    } else {
        args.grid_span
    };
    let first = SmoothingMatrix::new(result.sigma_first.clone()).map_err(Error::from)?;
    let last = SmoothingMatrix::new(result.sigma_star.clone()).map_err(Error::from)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["theta", "q_original", "q_smoothed_first", "q_smoothed_final"])
        .expect("in-memory write");
    for t in trace_grid(result.theta_hat[0], half_width, args.grid_points) {
        let theta = ParamVector::new(vec![t])?;
        let q = step_objective(data, &theta, result.criterion)?;
        let q1 = smoothed_objective_with(data, &theta, &first, result.criterion)?;
        let q2 = smoothed_objective_with(data, &theta, &last, result.criterion)?;
        writer
            .write_record([t.to_string(), q.to_string(), q1.to_string(), q2.to_string()])
            .expect("in-memory write");
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    write_output(args.out.as_deref(), &String::from_utf8(bytes).expect("utf-8 output"))
}

/// Long flags given more than once (the last one wins).
fn duplicate_flags(args: &[OsString]) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    for a in args.iter().skip(1) {
        let s = a.to_string_lossy();
        if let Some(flag) = s.strip_prefix("--") {
            let name = flag.split('=').next().unwrap_or(flag).to_string();
            *seen.entry(name).or_default() += 1;
        }
    }
    let mut dups: Vec<String> = seen.into_iter().filter(|(_, c)| *c > 1).map(|(k, _)| k).collect();
    dups.sort();
    dups
}

/// Parse `args` (including the program name), run the command and return
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let config = match CliConfig::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    for flag in duplicate_flags(&args) {
        warn!("--{flag} given more than once; using the last value");
    }
    let outcome = match &config.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Trace(a) => cmd_trace(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shapes() {
        assert_eq!(trace_grid(1.0, 2.0, 1), vec![1.0]);
        assert_eq!(trace_grid(0.0, 1.0, 3), vec![-1.0, 0.0, 1.0]);
        assert_eq!(trace_grid(0.0, 1.0, 401).len(), 401);
    }

    #[test]
    fn duplicate_flag_detection() {
        let args: Vec<OsString> = ["rankcorr", "simulate", "--n", "10", "--n=20", "--reps", "1"]
            .iter()
            .map(OsString::from)
            .collect();
        assert_eq!(duplicate_flags(&args), vec!["n".to_string()]);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["rankcorr", "simulate", "--n", "10"]), 1);
        assert_eq!(run(["rankcorr", "bogus"]), 1);
        assert_eq!(run(["rankcorr", "simulate", "--design", "IV", "--n", "50", "--reps", "1"]), 1);
        assert_eq!(run(["rankcorr", "--help"]), 0);
    }
}
