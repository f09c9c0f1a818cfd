//! Point estimation and the fixed-point iteration that produces point and
//! variance estimates together.
//!
//! [`fit`] runs:
//!
//! 1. `θ̂` = maximizer of the step objective, `Σ⁽⁰⁾ = I`;
//! 2. `Σ⁽ᵏ⁾ = D̂(θ̂, Σ⁽ᵏ⁻¹⁾)`, then `θ̃⁽ᵏ⁾` = maximizer of the objective
//!    smoothed with `Σ⁽ᵏ⁾`, started from the previous estimate;
//! 3. repeat until both `θ̃⁽ᵏ⁾` and `Σ⁽ᵏ⁾` stop moving.
//!
//! Censored data use the partial rank criterion throughout.

use log::{debug, warn};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{DataError, NumericalError, Result};
use crate::linalg;
use crate::model::{Criterion, Dataset, ParamVector, SmoothingMatrix};
use crate::objectives::{smoothed_value_and_score, step_objective};
use crate::optim::{
    minimize_bfgs, minimize_nelder_mead, BfgsOptions, BfgsStatus, NelderMeadOptions,
};
use crate::sandwich::sandwich_parts_with;
use crate::step::{IntervalChoice, StepProblem};

/// Where the sandwich is evaluated in each outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceAt {
    /// Always at the step-objective maximizer.
    #[default]
    StepEstimate,
    /// At the smoothed estimate from the previous iteration.
    Current,
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Stop when no entry of Σ moves by more than this.
    pub sigma_tol: f64,
    /// ... and no entry of θ̃ moves by more than this.
    pub theta_tol: f64,
    pub max_outer_iters: usize,
    /// Random restarts of the step-objective search (`d >= 2`).
    pub optimizer_restarts: usize,
    /// Evaluation budget per optimizer run.
    pub optimizer_max_evals: usize,
    /// Target sup-norm of the smoothed score.
    pub score_tol: f64,
    /// Box `|θ_k| <= bound` for the step-objective search.
    pub bound: f64,
    pub seed: u64,
    pub variance_at: VarianceAt,
    /// Starting smoothing matrix; identity when `None`.
    pub initial_sigma: Option<SmoothingMatrix>,
    /// Override the criterion implied by the data.
    pub criterion: Option<Criterion>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            sigma_tol: 1e-6,
            theta_tol: 1e-7,
            max_outer_iters: 100,
            optimizer_restarts: 20,
            optimizer_max_evals: 5000,
            score_tol: 1e-6,
            bound: 1e3,
            seed: 0,
            variance_at: VarianceAt::StepEstimate,
            initial_sigma: None,
            criterion: None,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<(), DataError> {
        let positive = [
            ("sigma_tol", self.sigma_tol),
            ("theta_tol", self.theta_tol),
            ("score_tol", self.score_tol),
            ("bound", self.bound),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DataError::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_outer_iters == 0 || self.optimizer_max_evals == 0 {
            return Err(DataError::Invalid("iteration caps must be at least 1".into()));
        }
        Ok(())
    }

    fn criterion_for(&self, data: &Dataset) -> Criterion {
        self.criterion.unwrap_or_else(|| data.criterion())
    }
}

/// Result of the step-objective search.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFit {
    pub theta: ParamVector,
    /// Objective value at `theta`.
    pub value: f64,
}

/// Maximize the rank (or, for censored data, partial rank) objective.
///
/// With one free coefficient the objective is maximized exactly by sweeping
/// all pair breakpoints; the point returned is the midpoint of the middle
/// maximizing interval. With more coefficients, Nelder–Mead restarts are
/// each polished by exact coordinate-wise line sweeps, and the best point
/// wins (ties go to the earliest restart).
pub fn maximize_step_objective(data: &Dataset, options: &FitOptions) -> Result<StepFit> {
    options.validate()?;
    let criterion = options.criterion_for(data);
    let problem = StepProblem::new(data, criterion);
    let d = data.dim();
    let clamp = |x: f64| x.clamp(-options.bound, options.bound);

    let theta = if d == 1 {
        let (t, _) = problem.line_sweep(&[0.0], &[1.0], IntervalChoice::Median);
        vec![clamp(t)]
    } else {
        let scales = spread_scales(data);
        let starts: Vec<Vec<f64>> = (0..options.optimizer_restarts.max(1))
            .map(|r| {
                if r == 0 {
                    return vec![0.0; d];
                }
                let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(r as u64));
                (0..d)
                    .map(|k| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        let s = if r % 2 == 1 { 1.0 } else { scales[k] };
                        clamp(z * s)
                    })
                    .collect()
            })
            .collect();
        let runs: Vec<(Vec<f64>, u64)> = starts
            .par_iter()
            .map(|x0| {
                let out = minimize_nelder_mead(
                    |x| {
                        if x.iter().any(|v| v.abs() > options.bound) {
                            f64::INFINITY
                        } else {
                            -(problem.count(x) as f64)
                        }
                    },
                    x0,
                    &NelderMeadOptions {
                        initial_step: scales.clone(),
                        max_evals: options.optimizer_max_evals,
                        f_tol: 0.0,
                        x_tol: 1e-8,
                    },
                );
                coordinate_polish(&problem, out.x, options.bound)
            })
            .collect();
        let mut best = 0;
        for (r, run) in runs.iter().enumerate() {
            if run.1 > runs[best].1 {
                best = r;
            }
        }
        runs[best].0.clone()
    };
    let theta = ParamVector::new(theta)?;
    let value = step_objective(data, &theta, criterion)?;
    Ok(StepFit { theta, value })
}

/// Per-coordinate scale that makes `θ_k x_k` comparable with the anchor.
fn spread_scales(data: &Dataset) -> Vec<f64> {
    let d = data.dim();
    let n = data.n() as f64;
    let sd = |k: usize| {
        let mean = (0..data.n()).map(|i| data.covariates(i)[k]).sum::<f64>() / n;
        ((0..data.n())
            .map(|i| (data.covariates(i)[k] - mean).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
    };
    let anchor = sd(d);
    (0..d)
        .map(|k| {
            let s = sd(k);
            if s > 0.0 && anchor > 0.0 {
                anchor / s
            } else {
                1.0
            }
        })
        .collect()
}

/// Exact line sweeps along each coordinate until no sweep improves.
fn coordinate_polish(problem: &StepProblem, mut theta: Vec<f64>, bound: f64) -> (Vec<f64>, u64) {
    let d = theta.len();
    let mut count = problem.count(&theta);
    for _round in 0..20 {
        let mut improved = false;
        for k in 0..d {
            let mut dir = vec![0.0; d];
            dir[k] = 1.0;
            let (t, _) = problem.line_sweep(&theta, &dir, IntervalChoice::KeepOrigin);
            let mut candidate = theta.clone();
            candidate[k] = (candidate[k] + t).clamp(-bound, bound);
            let c = problem.count(&candidate);
            if c > count {
                improved = true;
            }
            if c >= count {
                theta = candidate;
                count = c;
            }
        }
        if !improved {
            break;
        }
    }
    (theta, count)
}

/// Result of maximizing a smoothed objective.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedFit {
    pub theta: ParamVector,
    pub value: f64,
    /// Sup-norm of the score at `theta`.
    pub score_norm: f64,
    pub converged: bool,
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Maximize the objective smoothed with `sigma`, starting at `init`.
///
/// Quasi-Newton ascent with the analytic score; falls back to Nelder–Mead
/// if the line search fails before the score is small enough.
pub fn maximize_smoothed(
    data: &Dataset,
    sigma: &SmoothingMatrix,
    init: &ParamVector,
    options: &FitOptions,
) -> Result<SmoothedFit> {
    options.validate()?;
    init.check_dim(data)?;
    let criterion = options.criterion_for(data);
    let eval = |x: &[f64]| -> (f64, Vec<f64>) {
        let theta = ParamVector::new(x.to_vec()).expect("finite iterate");
        let (v, s) =
            smoothed_value_and_score(data, &theta, sigma, criterion).expect("dimensions checked");
        (-v, s.into_iter().map(|g| -g).collect())
    };
    let out = minimize_bfgs(
        eval,
        init.as_slice(),
        &BfgsOptions {
            g_tol: options.score_tol,
            max_iters: options.optimizer_max_evals,
            max_evals: options.optimizer_max_evals,
        },
    );
    let (mut x, mut f, mut g) = (out.x, out.f, out.grad);
    if out.status != BfgsStatus::Converged && sup_norm(&g) > options.score_tol {
        debug!("smoothed ascent stopped ({:?}); trying simplex search", out.status);
        let step: Vec<f64> = x.iter().map(|v| 0.05 * v.abs().max(0.1)).collect();
        let nm = minimize_nelder_mead(
            |p| eval(p).0,
            &x,
            &NelderMeadOptions {
                initial_step: step,
                max_evals: options.optimizer_max_evals,
                f_tol: 1e-15,
                x_tol: 1e-10,
            },
        );
        if nm.f < f {
            let (fv, gv) = eval(&nm.x);
            x = nm.x;
            f = fv;
            g = gv;
        }
    }
    let score_norm = sup_norm(&g);
    Ok(SmoothedFit {
        theta: ParamVector::new(x)?,
        value: -f,
        score_norm,
        converged: score_norm <= options.score_tol,
    })
}

/// One outer iteration of the fixed-point loop.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub sigma_change: f64,
    pub theta_change: f64,
    pub theta: Vec<f64>,
    pub score_norm: f64,
}

/// Point and variance estimates from [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    /// Final smoothed estimate.
    pub theta_hat: ParamVector,
    /// Step-objective maximizer.
    pub theta_mrce: ParamVector,
    /// Converged smoothing matrix Σ*: the estimated covariance of
    /// `√n (θ̂ - θ₀)`.
    pub sigma_star: Array2<f64>,
    /// Smoothing matrix after the first update, Σ⁽¹⁾.
    pub sigma_first: Array2<f64>,
    /// Estimated covariance of θ̂, `Σ* / n`.
    pub cov_hat: Array2<f64>,
    /// `sqrt(diag(cov_hat))`.
    pub std_errors: Vec<f64>,
    pub outer_iterations: usize,
    /// Max-abs change of Σ in each iteration.
    pub sigma_trace: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    /// Smoothed objective at θ̂ with Σ*.
    pub objective_at_optimum: f64,
    /// Step objective at the step maximizer.
    pub step_objective: f64,
    pub criterion: Criterion,
    pub n: usize,
}

impl EstimateResult {
    /// 95% Wald intervals `θ̂ ± 1.96·SE`.
    pub fn wald_ci_95(&self) -> Vec<(f64, f64)> {
        self.theta_hat
            .as_slice()
            .iter()
            .zip(&self.std_errors)
            .map(|(t, se)| (t - 1.96 * se, t + 1.96 * se))
            .collect()
    }
}

/// Turn a sandwich estimate into a valid smoothing matrix, flooring
/// eigenvalues when it is not numerically positive definite.
fn to_smoothing_matrix(d_hat: &Array2<f64>) -> Result<SmoothingMatrix> {
    match SmoothingMatrix::new(d_hat.clone()) {
        Ok(s) => Ok(s),
        Err(NumericalError::NotPositiveDefinite { .. }) | Err(NumericalError::NotSymmetric { .. }) => {
            let d = d_hat.nrows();
            let trace: f64 = (0..d).map(|k| d_hat[[k, k]]).sum();
            if trace.is_nan() || trace <= 0.0 {
                return Err(NumericalError::NotPositiveDefinite {
                    index: 0,
                    pivot: trace,
                }
                .into());
            }
            let floor = 1e-10 * trace / d as f64;
            warn!("sandwich estimate is not positive definite; flooring eigenvalues at {floor:e}");
            Ok(SmoothingMatrix::new(linalg::floor_eigenvalues(d_hat, floor)?)?)
        }
        Err(e) => Err(e.into()),
    }
}

/// Simultaneous point and variance estimation by the fixed-point iteration.
///
/// ```
/// use rankcorr::{fit, simulation::{generate_design, Design, DesignSpec}, FitOptions};
///
/// let data = generate_design(&DesignSpec::new(Design::I, 100)?, 3);
/// let result = fit(&data, &FitOptions::default())?;
/// assert!(result.converged);
/// assert!((result.theta_hat[0] - 1.6).abs() < 0.3);
/// # Ok::<(), rankcorr::Error>(())
/// ```
pub fn fit(data: &Dataset, options: &FitOptions) -> Result<EstimateResult> {
    options.validate()?;
    let criterion = options.criterion_for(data);
    let d = data.dim();
    let step = maximize_step_objective(data, options)?;
    debug!("step maximizer {:?} (objective {})", step.theta.as_slice(), step.value);

    let mut sigma = match &options.initial_sigma {
        Some(s) if s.dim() == d => s.clone(),
        Some(s) => {
            return Err(DataError::Invalid(format!(
                "initial smoothing matrix is {0}x{0}, dataset has d = {d}",
                s.dim()
            ))
            .into())
        }
        None => SmoothingMatrix::identity(d),
    };
    let mut theta = step.theta.clone();
    let mut sigma_first = None;
    let mut records = Vec::new();
    let mut last_value = f64::NAN;
    let mut converged = false;

    for k in 1..=options.max_outer_iters {
        let at = match options.variance_at {
            VarianceAt::StepEstimate => &step.theta,
            VarianceAt::Current => &theta,
        };
        let parts = sandwich_parts_with(data, at, &sigma, criterion)?;
        let next_sigma = to_smoothing_matrix(&parts.d_hat)?;
        let sigma_change = linalg::max_abs_diff(next_sigma.matrix(), sigma.matrix());
        let smoothed = maximize_smoothed(data, &next_sigma, &theta, options)?;
        if !smoothed.converged {
            warn!(
                "iteration {k}: smoothed maximization stopped with score norm {:e}",
                smoothed.score_norm
            );
        }
        let theta_change = theta
            .as_slice()
            .iter()
            .zip(smoothed.theta.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        debug!("iteration {k}: Σ change {sigma_change:e}, θ change {theta_change:e}");
        records.push(IterationRecord {
            sigma_change,
            theta_change,
            theta: smoothed.theta.as_slice().to_vec(),
            score_norm: smoothed.score_norm,
        });
        sigma_first.get_or_insert_with(|| next_sigma.matrix().clone());
        sigma = next_sigma;
        theta = smoothed.theta;
        last_value = smoothed.value;
        if theta_change <= options.theta_tol && sigma_change <= options.sigma_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("fixed-point iteration did not converge in {} iterations", options.max_outer_iters);
    }

    let n = data.n();
    let sigma_star = sigma.into_matrix();
    let cov_hat = &sigma_star / n as f64;
    let std_errors = (0..d).map(|k| cov_hat[[k, k]].max(0.0).sqrt()).collect();
    Ok(EstimateResult {
        theta_hat: theta,
        theta_mrce: step.theta,
        sigma_first: sigma_first.expect("at least one iteration"),
        sigma_star,
        cov_hat,
        std_errors,
        outer_iterations: records.len(),
        sigma_trace: records.iter().map(|r| r.sigma_change).collect(),
        iterations: records,
        converged,
        objective_at_optimum: last_value,
        step_objective: step.value,
        criterion,
        n,
    })
}
