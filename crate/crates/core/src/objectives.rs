//! Rank correlation objectives, their smoothed versions and the analytic
//! score.
//!
//! Every pair sum runs over unordered pairs `i < j`. A pair carries the
//! concordance sign
//!
//! * `H_ij = sgn(Y_i - Y_j)` for the rank criterion, and
//! * `H_ij = Δ_j·I[Y_i > Y_j] - Δ_i·I[Y_j > Y_i]` for the partial rank
//!   criterion,
//!
//! and contributes `Φ(H_ij · √n X_ij'β / σ_ij)` to the smoothed objective
//! whenever `H_ij ≠ 0`. Summing the ordered-pair formulation over `i ≠ j`
//! gives exactly the same terms, so nothing is lost by halving the work.
//!
//! Rows are processed in parallel; each row is summed sequentially with
//! compensated summation and row totals are reduced in row order, so the
//! results do not depend on the number of worker threads.

use rayon::prelude::*;

use crate::accumulate::{Neumaier, NeumaierVec};
use crate::error::DataError;
use crate::model::{build_full_coefficients, Criterion, Dataset, ParamVector, SmoothingMatrix};
use crate::normal;

/// One pair's ingredients for the smoothed objective.
#[derive(Debug, Clone, PartialEq)]
pub struct PairKernelTerm {
    /// Concordance sign `H_ij ∈ {-1, 0, 1}`.
    pub h: f64,
    /// `X_ij'β(θ)`.
    pub index_delta: f64,
    /// `σ_ij`.
    pub scale: f64,
    /// First `d` components of `X_i - X_j`.
    pub first_block_diff: Vec<f64>,
}

/// Concordance sign of the pair `(i, j)` under `criterion`.
#[inline]
pub(crate) fn pair_sign(data: &Dataset, criterion: Criterion, i: usize, j: usize) -> f64 {
    let y = data.response();
    let gt = y[i] > y[j];
    let lt = y[j] > y[i];
    match criterion {
        Criterion::Rank => (gt as i8 - lt as i8) as f64,
        Criterion::PartialRank => {
            let e = data.events();
            ((e[j] && gt) as i8 - (e[i] && lt) as i8) as f64
        }
    }
}

/// Shared per-evaluation state for the smoothed pair sums.
pub(crate) struct PairContext<'a> {
    pub data: &'a Dataset,
    pub sigma: &'a SmoothingMatrix,
    pub beta: Vec<f64>,
    pub criterion: Criterion,
    pub root_n: f64,
}

impl<'a> PairContext<'a> {
    pub fn new(
        data: &'a Dataset,
        theta: &ParamVector,
        sigma: &'a SmoothingMatrix,
        criterion: Criterion,
    ) -> Result<Self, DataError> {
        theta.check_dim(data)?;
        if sigma.dim() != data.dim() {
            return Err(DataError::Invalid(format!(
                "smoothing matrix is {0}x{0}, dataset has d = {1}",
                sigma.dim(),
                data.dim()
            )));
        }
        Ok(Self {
            data,
            sigma,
            beta: build_full_coefficients(theta),
            criterion,
            root_n: (data.n() as f64).sqrt(),
        })
    }

    /// Fill `diff` with `X_i - X_j` and return `(X_ij'β, σ_ij)`.
    #[inline]
    pub fn geometry(&self, i: usize, j: usize, diff: &mut [f64]) -> (f64, f64) {
        let xi = self.data.covariates(i);
        let xj = self.data.covariates(j);
        let mut index = 0.0;
        for k in 0..diff.len() {
            diff[k] = xi[k] - xj[k];
            index += diff[k] * self.beta[k];
        }
        let d = self.sigma.dim();
        let scale = self.sigma.quad_form(&diff[..d]).max(0.0).sqrt();
        (index, scale)
    }

    #[inline]
    pub fn sign(&self, i: usize, j: usize) -> f64 {
        pair_sign(self.data, self.criterion, i, j)
    }

    pub fn term(&self, i: usize, j: usize) -> PairKernelTerm {
        let mut diff = vec![0.0; self.data.dim() + 1];
        let (index_delta, scale) = self.geometry(i, j, &mut diff);
        diff.pop();
        PairKernelTerm {
            h: self.sign(i, j),
            index_delta,
            scale,
            first_block_diff: diff,
        }
    }

    fn normalizer(&self) -> f64 {
        let n = self.data.n() as f64;
        n * (n - 1.0)
    }

    /// Row `i`'s share of the smoothed objective (pairs `j > i`).
    fn row_value(&self, i: usize, diff: &mut [f64]) -> f64 {
        let mut acc = Neumaier::new();
        for j in i + 1..self.data.n() {
            let h = self.sign(i, j);
            if h == 0.0 {
                continue;
            }
            let (index, scale) = self.geometry(i, j, diff);
            if scale > 0.0 {
                acc.add(normal::cdf(h * self.root_n * index / scale));
            } else if h * index > 0.0 {
                acc.add(1.0);
            }
        }
        acc.total()
    }

    /// Row `i`'s share of the objective and of the score.
    fn row_value_and_score(&self, i: usize, diff: &mut [f64]) -> (f64, Vec<f64>) {
        let d = self.data.dim();
        let mut value = Neumaier::new();
        let mut score = NeumaierVec::zeros(d);
        for j in i + 1..self.data.n() {
            let h = self.sign(i, j);
            if h == 0.0 {
                continue;
            }
            let (index, scale) = self.geometry(i, j, diff);
            if scale > 0.0 {
                let z = self.root_n * index / scale;
                value.add(normal::cdf(h * z));
                let w = h * normal::pdf(z) * self.root_n / scale;
                for k in 0..d {
                    score.add_at(k, w * diff[k]);
                }
            } else if h * index > 0.0 {
                value.add(1.0);
            }
        }
        (value.total(), score.totals())
    }

    pub fn value(&self) -> f64 {
        let rows: Vec<f64> = (0..self.data.n())
            .into_par_iter()
            .map_init(
                || vec![0.0; self.data.dim() + 1],
                |diff, i| self.row_value(i, diff),
            )
            .collect();
        let mut acc = Neumaier::new();
        rows.iter().for_each(|&r| acc.add(r));
        acc.total() / self.normalizer()
    }

    pub fn value_and_score(&self) -> (f64, Vec<f64>) {
        let d = self.data.dim();
        let rows: Vec<(f64, Vec<f64>)> = (0..self.data.n())
            .into_par_iter()
            .map_init(
                || vec![0.0; d + 1],
                |diff, i| self.row_value_and_score(i, diff),
            )
            .collect();
        let mut value = Neumaier::new();
        let mut score = NeumaierVec::zeros(d);
        for (v, s) in &rows {
            value.add(*v);
            score.add_slice(s);
        }
        let norm = self.normalizer();
        (
            value.total() / norm,
            score.totals().into_iter().map(|s| s / norm).collect(),
        )
    }
}

fn count_concordant(data: &Dataset, theta: &ParamVector, use_events: bool) -> Result<f64, DataError> {
    theta.check_dim(data)?;
    let beta = build_full_coefficients(theta);
    let n = data.n();
    let y = data.response();
    let events = data.events();
    let index: Vec<f64> = (0..n)
        .map(|i| data.covariates(i).iter().zip(&beta).map(|(x, b)| x * b).sum())
        .collect();
    let count: u64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut c = 0u64;
            for j in 0..n {
                if y[i] > y[j] && index[i] > index[j] && (!use_events || events[j]) {
                    c += 1;
                }
            }
            c
        })
        .sum();
    Ok(count as f64 / (n as f64 * (n as f64 - 1.0)))
}

/// The rank correlation objective
/// `Q_n(θ) = 1/(n(n-1)) Σ_{i≠j} I[Y_i > Y_j]·I[X_i'β > X_j'β]`.
///
/// Censoring indicators are ignored.
pub fn rank_objective(data: &Dataset, theta: &ParamVector) -> Result<f64, DataError> {
    count_concordant(data, theta, false)
}

/// The partial rank correlation objective, which only counts a pair when
/// the smaller observed time is an event:
/// `Q*_n(θ) = 1/(n(n-1)) Σ_{i≠j} Δ_j·I[Y_i > Y_j]·I[X_i'β > X_j'β]`.
pub fn partial_rank_objective(data: &Dataset, theta: &ParamVector) -> Result<f64, DataError> {
    count_concordant(data, theta, true)
}

/// The step objective implied by `criterion`.
pub fn step_objective(
    data: &Dataset,
    theta: &ParamVector,
    criterion: Criterion,
) -> Result<f64, DataError> {
    match criterion {
        Criterion::Rank => rank_objective(data, theta),
        Criterion::PartialRank => partial_rank_objective(data, theta),
    }
}

/// Self-induced smoothed objective
/// `Q̃_n(θ) = 1/(n(n-1)) Σ_{i≠j} w_ij·Φ(√n X_ij'β / σ_ij)`
/// using the partial rank weights when the data are censored.
///
/// A pair with `σ_ij = 0` contributes the indicator `I[X_ij'β > 0]`.
///
/// ```
/// use rankcorr::{smoothed_objective, Dataset, Observation, ParamVector, SmoothingMatrix};
///
/// let data = Dataset::new(vec![
///     Observation::new(2.0, vec![1.0, 1.0]),
///     Observation::new(1.0, vec![0.0, 0.0]),
/// ])?;
/// let q = smoothed_objective(&data, &ParamVector::zeros(1), &SmoothingMatrix::identity(1))?;
/// assert!((q - 0.460_675_198_237_428_6).abs() < 1e-15);
/// # Ok::<(), rankcorr::DataError>(())
/// ```
pub fn smoothed_objective(
    data: &Dataset,
    theta: &ParamVector,
    sigma: &SmoothingMatrix,
) -> Result<f64, DataError> {
    smoothed_objective_with(data, theta, sigma, data.criterion())
}

/// [`smoothed_objective`] with an explicit criterion.
pub fn smoothed_objective_with(
    data: &Dataset,
    theta: &ParamVector,
    sigma: &SmoothingMatrix,
    criterion: Criterion,
) -> Result<f64, DataError> {
    Ok(PairContext::new(data, theta, sigma, criterion)?.value())
}

/// Exact gradient of [`smoothed_objective`] with respect to θ:
/// `1/(n(n-1)) Σ_{i<j} H_ij·φ(√n X_ij'β/σ_ij)·√n X_ij⁽¹⁾/σ_ij`.
///
/// Pairs with `σ_ij = 0` contribute nothing.
pub fn smoothed_score(
    data: &Dataset,
    theta: &ParamVector,
    sigma: &SmoothingMatrix,
) -> Result<Vec<f64>, DataError> {
    smoothed_score_with(data, theta, sigma, data.criterion())
}

/// [`smoothed_score`] with an explicit criterion.
pub fn smoothed_score_with(
    data: &Dataset,
    theta: &ParamVector,
    sigma: &SmoothingMatrix,
    criterion: Criterion,
) -> Result<Vec<f64>, DataError> {
    Ok(PairContext::new(data, theta, sigma, criterion)?
        .value_and_score()
        .1)
}

/// Objective and score in one pass.
pub fn smoothed_value_and_score(
    data: &Dataset,
    theta: &ParamVector,
    sigma: &SmoothingMatrix,
    criterion: Criterion,
) -> Result<(f64, Vec<f64>), DataError> {
    Ok(PairContext::new(data, theta, sigma, criterion)?.value_and_score())
}

/// Kernel ingredients of the pair `(i, j)`, mainly for inspection and tests.
pub fn pair_term(
    data: &Dataset,
    theta: &ParamVector,
    sigma: &SmoothingMatrix,
    i: usize,
    j: usize,
) -> Result<PairKernelTerm, DataError> {
    Ok(PairContext::new(data, theta, sigma, data.criterion())?.term(i, j))
}
