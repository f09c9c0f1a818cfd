//! Monte Carlo designs, the replication engine and summary metrics.
//!
//! * Design I: `X ~ N₂((-10, 20)', diag(9, 4))`, `β₀ = (1.6, 1)`, errors
//!   with density `2 exp(2w - e^{2w})` and `Y = exp((X'β₀ + ε)/2)`, i.e.
//!   the transformation `H⁻¹(y) = log y²` on the positive branch.
//! * Design II: Design I right-censored by `C ~ N(9.2, 0.5²)`.
//! * Design III: linear model `Y = X'β₀ + ε` with `β₀ = (1.6, 0.5, 1)`,
//!   `(X₁, X₃) ~ N₂((-2, 2)', I)`, `X₂ ∈ {0, 2}` with equal probability and
//!   `ε ~ N(0, 0.5²)`. The continuous `X₃` is the anchor.
//!
//! Design I errors are drawn by inverse CDF: if `W` has density
//! `2 exp(2w - e^{2w})` then `G = 2W` has density `exp(g - e^g)`, whose CDF
//! is `1 - exp(-e^g)`, so `G = log(-log U)` with `U` uniform and `ε = G/2`.

use std::fmt::Write as _;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Open01};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{DataError, Error, Result};
use crate::estimator::{fit, FitOptions};
use crate::linalg;
use crate::model::{Dataset, Observation, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Design {
    I,
    II,
    III,
}

impl Design {
    pub fn true_theta(self) -> Vec<f64> {
        match self {
            Design::I | Design::II => vec![1.6],
            Design::III => vec![1.6, 0.5],
        }
    }

    pub fn is_censored(self) -> bool {
        self == Design::II
    }
}

impl FromStr for Design {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, DataError> {
        match s.trim() {
            "I" | "1" => Ok(Design::I),
            "II" | "2" => Ok(Design::II),
            "III" | "3" => Ok(Design::III),
            other => Err(DataError::Invalid(format!(
                "unknown design {other:?} (expected I, II or III)"
            ))),
        }
    }
}

impl std::fmt::Display for Design {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Design::I => "I",
            Design::II => "II",
            Design::III => "III",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub design: Design,
    pub n: usize,
    pub true_theta: ParamVector,
}

impl DesignSpec {
    pub fn new(design: Design, n: usize) -> Result<Self, DataError> {
        if n < 10 {
            return Err(DataError::Invalid(format!("design sample size must be at least 10, got {n}")));
        }
        Ok(Self {
            design,
            n,
            true_theta: ParamVector::new(design.true_theta())?,
        })
    }
}

const CENSOR_MEAN: f64 = 9.2;
const CENSOR_SD: f64 = 0.5;

fn design_i_observation(rng: &mut ChaCha8Rng, theta: &[f64]) -> (f64, Vec<f64>) {
    let x1 = Normal::new(-10.0, 3.0).expect("valid").sample(rng);
    let x2 = Normal::new(20.0, 2.0).expect("valid").sample(rng);
    let u: f64 = Open01.sample(rng);
    let eps = 0.5 * (-u.ln()).ln();
    let y = ((theta[0] * x1 + x2 + eps) / 2.0).exp();
    (y, vec![x1, x2])
}

/// Draw one dataset from `spec`. The same `(spec, seed)` always gives the
/// same data.
pub fn generate_design(spec: &DesignSpec, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = spec.true_theta.as_slice();
    let observations = (0..spec.n)
        .map(|_| match spec.design {
            Design::I => {
                let (y, x) = design_i_observation(&mut rng, theta);
                Observation::new(y, x)
            }
            Design::II => {
                let (y, x) = design_i_observation(&mut rng, theta);
                let c = Normal::new(CENSOR_MEAN, CENSOR_SD).expect("valid").sample(&mut rng);
                Observation::censored(y.min(c), x, y <= c)
            }
            Design::III => {
                let x1 = Normal::new(-2.0, 1.0).expect("valid").sample(&mut rng);
                let x3 = Normal::new(2.0, 1.0).expect("valid").sample(&mut rng);
                let x2 = if rng.random_bool(0.5) { 2.0 } else { 0.0 };
                let eps = Normal::new(0.0, 0.5).expect("valid").sample(&mut rng);
                let y = theta[0] * x1 + theta[1] * x2 + x3 + eps;
                Observation::new(y, vec![x1, x2, x3])
            }
        })
        .collect();
    Dataset::new(observations).expect("generated data are valid")
}

/// Least squares of `Y` on an intercept and all `d + 1` covariates, with the
/// first `d` slopes divided by the anchor slope.
pub fn ols_fit(data: &Dataset) -> Result<ParamVector> {
    let d = data.dim();
    let p = d + 2;
    let mut xtx = Array2::<f64>::zeros((p, p));
    let mut xty = vec![0.0; p];
    let mut row = vec![0.0; p];
    for i in 0..data.n() {
        row[0] = 1.0;
        row[1..].copy_from_slice(data.covariates(i));
        let y = data.response()[i];
        for r in 0..p {
            xty[r] += row[r] * y;
            for c in 0..p {
                xtx[[r, c]] += row[r] * row[c];
            }
        }
    }
    let inv = linalg::invert_spd(&xtx)?;
    let coef: Vec<f64> = (0..p)
        .map(|r| (0..p).map(|c| inv[[r, c]] * xty[c]).sum())
        .collect();
    let anchor = coef[p - 1];
    if anchor.abs() < 1e-10 {
        return Err(DataError::Invalid(format!(
            "least-squares anchor coefficient {anchor:e} is too close to zero"
        ))
        .into());
    }
    Ok(ParamVector::new(coef[1..=d].iter().map(|b| b / anchor).collect())?)
}

/// One replication's estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub theta_hat: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub converged: bool,
    pub theta_step: Option<Vec<f64>>,
    pub theta_ls: Option<Vec<f64>>,
}

/// Metrics for one coefficient of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSummary {
    pub true_value: f64,
    pub mean: f64,
    pub bias: f64,
    pub rmse: f64,
    pub mean_se: Option<f64>,
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub label: String,
    pub params: Vec<ParamSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub design: Design,
    pub n: usize,
    /// Replications attempted.
    pub reps: usize,
    /// Replications that failed or did not converge (excluded).
    pub failures: usize,
    /// Smoothed estimator with sandwich standard errors.
    pub smoothed: EstimatorSummary,
    /// Step-objective estimator.
    pub step: Option<EstimatorSummary>,
    /// Least squares comparator.
    pub least_squares: Option<EstimatorSummary>,
}

impl SimulationSummary {
    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / self.reps as f64
    }
}

fn summarize_param(truth: f64, estimates: &[f64], ses: Option<&[f64]>) -> ParamSummary {
    let m = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / m;
    let rmse = (estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / m).sqrt();
    let (mean_se, coverage) = match ses {
        Some(ses) => {
            let hits = estimates
                .iter()
                .zip(ses)
                .filter(|(e, se)| (*e - truth).abs() <= 1.96 * **se)
                .count();
            (Some(ses.iter().sum::<f64>() / m), Some(hits as f64 / m))
        }
        None => (None, None),
    };
    ParamSummary {
        true_value: truth,
        mean,
        bias: mean - truth,
        rmse,
        mean_se,
        coverage,
    }
}

fn summarize_estimator(
    label: &str,
    truth: &[f64],
    estimates: &[&Vec<f64>],
    ses: Option<&[&Vec<f64>]>,
) -> EstimatorSummary {
    let params = (0..truth.len())
        .map(|k| {
            let est: Vec<f64> = estimates.iter().map(|e| e[k]).collect();
            let se: Option<Vec<f64>> = ses.map(|s| s.iter().map(|v| v[k]).collect());
            summarize_param(truth[k], &est, se.as_deref())
        })
        .collect();
    EstimatorSummary {
        label: label.to_string(),
        params,
    }
}

/// Aggregate replication outcomes. Errors and non-converged fits count as
/// failures and are left out of every metric.
pub fn summarize(spec: &DesignSpec, outcomes: &[Result<Replicate>]) -> Result<SimulationSummary> {
    let good: Vec<&Replicate> = outcomes
        .iter()
        .filter_map(|o| o.as_ref().ok())
        .filter(|r| r.converged)
        .collect();
    if good.is_empty() {
        return Err(Error::AllReplicationsFailed {
            reps: outcomes.len(),
        });
    }
    let truth = spec.true_theta.as_slice();
    let censored = spec.design.is_censored();
    let thetas: Vec<&Vec<f64>> = good.iter().map(|r| &r.theta_hat).collect();
    let ses: Vec<&Vec<f64>> = good.iter().map(|r| &r.std_errors).collect();
    let smoothed = summarize_estimator(if censored { "SPRCE" } else { "SMRCE" }, truth, &thetas, Some(&ses));
    let step = good
        .iter()
        .map(|r| r.theta_step.as_ref())
        .collect::<Option<Vec<_>>>()
        .map(|s| summarize_estimator(if censored { "PRCE" } else { "MRCE" }, truth, &s, None));
    let least_squares = good
        .iter()
        .map(|r| r.theta_ls.as_ref())
        .collect::<Option<Vec<_>>>()
        .map(|s| summarize_estimator("LS", truth, &s, None));
    Ok(SimulationSummary {
        design: spec.design,
        n: spec.n,
        reps: outcomes.len(),
        failures: outcomes.len() - good.len(),
        smoothed,
        step,
        least_squares,
    })
}

/// Run `reps` replications with a custom fitter. Replication `r` (from 1)
/// uses seed `seed + r`, so results do not depend on scheduling.
pub fn run_study_with<F>(spec: &DesignSpec, reps: usize, seed: u64, fitter: F) -> Result<SimulationSummary>
where
    F: Fn(&Dataset) -> Result<Replicate> + Sync,
{
    if reps == 0 {
        return Err(DataError::Invalid("reps must be at least 1".into()).into());
    }
    let outcomes: Vec<Result<Replicate>> = (1..=reps as u64)
        .into_par_iter()
        .map(|r| fitter(&generate_design(spec, seed.wrapping_add(r))))
        .collect();
    summarize(spec, &outcomes)
}

/// The default fitter: [`fit`], plus least squares for Design III.
pub fn fit_replicate(design: Design, data: &Dataset, options: &FitOptions) -> Result<Replicate> {
    let result = fit(data, options)?;
    let theta_ls = if design == Design::III {
        Some(ols_fit(data)?.into_vec())
    } else {
        None
    };
    Ok(Replicate {
        theta_hat: result.theta_hat.into_vec(),
        std_errors: result.std_errors,
        converged: result.converged,
        theta_step: Some(result.theta_mrce.into_vec()),
        theta_ls,
    })
}

/// Monte Carlo study of the fixed-point estimator on one design.
pub fn run_study(
    spec: &DesignSpec,
    reps: usize,
    seed: u64,
    options: &FitOptions,
) -> Result<SimulationSummary> {
    run_study_with(spec, reps, seed, |data| fit_replicate(spec.design, data, options))
}

fn param_names(d: usize) -> Vec<String> {
    (1..=d).map(|k| format!("theta{k}")).collect()
}

fn rows(summary: &SimulationSummary) -> Vec<(String, String, &ParamSummary)> {
    let names = param_names(summary.smoothed.params.len());
    [Some(&summary.smoothed), summary.step.as_ref(), summary.least_squares.as_ref()]
        .into_iter()
        .flatten()
        .flat_map(|e| {
            e.params
                .iter()
                .zip(&names)
                .map(move |(p, name)| (e.label.clone(), name.clone(), p))
        })
        .collect()
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

/// Aligned text table with columns Est, Param, Mean, Bias, RMSE, SE and
/// coverage.
pub fn format_table(summary: &SimulationSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Design {}  n = {}  reps = {}  failures = {}",
        summary.design, summary.n, summary.reps, summary.failures
    );
    let _ = writeln!(
        out,
        "{:<6} {:<7} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "Est", "Param", "Mean", "Bias", "RMSE", "SE", "coverage"
    );
    for (label, name, p) in rows(summary) {
        let _ = writeln!(
            out,
            "{:<6} {:<7} {:>9.4} {:>9.4} {:>9.4} {:>9} {:>9}",
            label,
            name,
            p.mean,
            p.bias,
            p.rmse,
            opt(p.mean_se, 4),
            opt(p.coverage.map(|c| 100.0 * c), 1),
        );
    }
    out
}

/// CSV twin of [`format_table`].
pub fn format_csv(summary: &SimulationSummary) -> String {
    let mut out = String::from("estimator,param,true_value,mean,bias,rmse,se,coverage\n");
    for (label, name, p) in rows(summary) {
        let _ = writeln!(
            out,
            "{label},{name},{},{},{},{},{},{}",
            p.true_value,
            p.mean,
            p.bias,
            p.rmse,
            p.mean_se.map_or(String::new(), |v| v.to_string()),
            p.coverage.map_or(String::new(), |v| v.to_string()),
        );
    }
    out
}
