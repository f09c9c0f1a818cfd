//! Domain types: observations, datasets, parameter vectors and smoothing
//! matrices, plus the pairwise geometry shared by every objective.
//!
//! The covariate vector of each observation has `d + 1` entries. The last
//! entry is the *anchor*: its coefficient is fixed at 1, so only the first
//! `d` coefficients are free. All pair quantities are built from the
//! difference `x_i - x_j`; the smoothing scale only looks at its first `d`
//! components.

use ndarray::Array2;

use crate::error::{DataError, NumericalError};
use crate::linalg;

/// One observed unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Response, or the observed time `min(Y, C)` under right censoring.
    pub response: f64,
    /// `d + 1` covariates; the last one is the anchor.
    pub covariates: Vec<f64>,
    /// `true` when the event was observed (not censored).
    pub event: bool,
}

impl Observation {
    pub fn new(response: f64, covariates: Vec<f64>) -> Self {
        Self {
            response,
            covariates,
            event: true,
        }
    }

    pub fn censored(response: f64, covariates: Vec<f64>, event: bool) -> Self {
        Self {
            response,
            covariates,
            event,
        }
    }
}

/// Which pairwise criterion a dataset is scored with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Criterion {
    /// Rank correlation over all response-ordered pairs.
    Rank,
    /// Partial rank correlation: a pair only counts when the smaller
    /// observed time is an event.
    PartialRank,
}

/// A validated sample of `n >= 2` observations sharing `d + 1` covariates.
///
/// Immutable after construction; covariates are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    response: Vec<f64>,
    covariates: Vec<f64>,
    event: Vec<bool>,
    dim: usize,
    censored: bool,
}

impl Dataset {
    pub fn new(observations: Vec<Observation>) -> Result<Self, DataError> {
        let n = observations.len();
        if n == 0 {
            return Err(DataError::Empty);
        }
        let width = observations[0].covariates.len();
        if width < 2 {
            return Err(DataError::TooFewCovariates(width));
        }
        let mut response = Vec::with_capacity(n);
        let mut covariates = Vec::with_capacity(n * width);
        let mut event = Vec::with_capacity(n);
        for (i, obs) in observations.into_iter().enumerate() {
            let row = i + 1;
            if obs.covariates.len() != width {
                return Err(DataError::Ragged {
                    row,
                    expected: width,
                    found: obs.covariates.len(),
                });
            }
            if !obs.response.is_finite() {
                return Err(DataError::NonFinite {
                    row,
                    field: "response".into(),
                });
            }
            if let Some(k) = obs.covariates.iter().position(|x| !x.is_finite()) {
                return Err(DataError::NonFinite {
                    row,
                    field: format!("covariate {}", k + 1),
                });
            }
            response.push(obs.response);
            covariates.extend_from_slice(&obs.covariates);
            event.push(obs.event);
        }
        if n < 2 {
            return Err(DataError::TooFewObservations(n));
        }
        let censored = event.iter().any(|&e| !e);
        Ok(Self {
            response,
            covariates,
            event,
            dim: width - 1,
            censored,
        })
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.response.len()
    }

    /// Number of free coefficients `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether any observation is censored.
    pub fn is_censored(&self) -> bool {
        self.censored
    }

    /// The criterion implied by the data: partial rank correlation when any
    /// observation is censored.
    pub fn criterion(&self) -> Criterion {
        if self.censored {
            Criterion::PartialRank
        } else {
            Criterion::Rank
        }
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn events(&self) -> &[bool] {
        &self.event
    }

    /// Covariate row `i` (length `d + 1`).
    #[inline]
    pub fn covariates(&self, i: usize) -> &[f64] {
        let w = self.dim + 1;
        &self.covariates[i * w..(i + 1) * w]
    }

    pub fn observation(&self, i: usize) -> Observation {
        Observation {
            response: self.response[i],
            covariates: self.covariates(i).to_vec(),
            event: self.event[i],
        }
    }

    pub fn observations(&self) -> impl Iterator<Item = Observation> + '_ {
        (0..self.n()).map(|i| self.observation(i))
    }

    /// Fraction of observations that are censored.
    pub fn censoring_rate(&self) -> f64 {
        self.event.iter().filter(|&&e| !e).count() as f64 / self.n() as f64
    }

    /// Same covariates and events, responses replaced by `f(y)`.
    pub fn map_response(&self, f: impl Fn(f64) -> f64) -> Result<Self, DataError> {
        Self::new(
            self.observations()
                .map(|mut o| {
                    o.response = f(o.response);
                    o
                })
                .collect(),
        )
    }

    /// Same data with every covariate multiplied by `c`.
    pub fn scale_covariates(&self, c: f64) -> Result<Self, DataError> {
        Self::new(
            self.observations()
                .map(|mut o| {
                    o.covariates.iter_mut().for_each(|x| *x *= c);
                    o
                })
                .collect(),
        )
    }

    /// Same data with new censoring indicators.
    pub fn with_events(&self, events: &[bool]) -> Result<Self, DataError> {
        if events.len() != self.n() {
            return Err(DataError::Invalid(format!(
                "{} indicators for {} observations",
                events.len(),
                self.n()
            )));
        }
        Self::new(
            self.observations()
                .zip(events)
                .map(|(mut o, &e)| {
                    o.event = e;
                    o
                })
                .collect(),
        )
    }
}

/// The `d` free regression coefficients θ.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(theta: Vec<f64>) -> Result<Self, DataError> {
        if let Some(k) = theta.iter().position(|x| !x.is_finite()) {
            return Err(DataError::ParamNotFinite(k));
        }
        Ok(Self(theta))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn check_dim(&self, data: &Dataset) -> Result<(), DataError> {
        if self.len() != data.dim() {
            return Err(DataError::ParamLength {
                expected: data.dim(),
                found: self.len(),
            });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

/// Full coefficient vector `(θ_1, ..., θ_d, 1)`.
pub fn build_full_coefficients(theta: &ParamVector) -> Vec<f64> {
    let mut beta = Vec::with_capacity(theta.len() + 1);
    beta.extend_from_slice(theta.as_slice());
    beta.push(1.0);
    beta
}

/// Symmetric positive definite `d x d` matrix Σ that sets the smoothing
/// scale of each pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingMatrix {
    sigma: Array2<f64>,
}

/// Relative tolerance for the symmetry check.
const SYMMETRY_RTOL: f64 = 1e-12;

impl SmoothingMatrix {
    pub fn new(sigma: Array2<f64>) -> Result<Self, NumericalError> {
        let (rows, cols) = sigma.dim();
        if rows != cols || rows == 0 {
            return Err(NumericalError::Shape {
                rows,
                cols,
                expected: rows.max(1),
            });
        }
        if sigma.iter().any(|x| !x.is_finite()) {
            return Err(NumericalError::NonFinite);
        }
        let scale = sigma.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        for r in 0..rows {
            for c in 0..r {
                let gap = (sigma[[r, c]] - sigma[[c, r]]).abs();
                if gap > SYMMETRY_RTOL * scale {
                    return Err(NumericalError::NotSymmetric { row: r, col: c, gap });
                }
            }
        }
        linalg::cholesky(&sigma)?;
        Ok(Self { sigma })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            sigma: Array2::eye(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.sigma
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.sigma
    }

    /// `c · Σ` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self, NumericalError> {
        Self::new(&self.sigma * c)
    }

    /// `v' Σ v` over the first `d` entries of `v`.
    #[inline]
    pub(crate) fn quad_form(&self, v: &[f64]) -> f64 {
        let d = self.dim();
        let s = self.sigma.as_slice().expect("standard layout");
        let mut total = 0.0;
        for r in 0..d {
            let mut row = 0.0;
            for c in 0..d {
                row += s[r * d + c] * v[c];
            }
            total += v[r] * row;
        }
        total
    }
}

/// Pairwise smoothing scale `σ_ij = sqrt(x⁽¹⁾' Σ x⁽¹⁾)` where `x⁽¹⁾` is the
/// first `d` components of `x_i - x_j`.
///
/// # Panics
///
/// If the covariate vectors do not have `Σ.dim() + 1` entries.
pub fn pair_scale(x_i: &[f64], x_j: &[f64], sigma: &SmoothingMatrix) -> f64 {
    let d = sigma.dim();
    assert!(
        x_i.len() == d + 1 && x_j.len() == d + 1,
        "pair_scale: covariates have lengths {} and {}, smoothing matrix is {d}x{d}",
        x_i.len(),
        x_j.len()
    );
    let diff: Vec<f64> = x_i[..d].iter().zip(&x_j[..d]).map(|(a, b)| a - b).collect();
    sigma.quad_form(&diff).max(0.0).sqrt()
}

/// A raw row as read from an external source, before numeric validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRow {
    pub response: String,
    pub covariates: Vec<String>,
    pub event: Option<String>,
}

fn parse_number(row: usize, field: &str, value: &str) -> Result<f64, DataError> {
    let x: f64 = value.trim().parse().map_err(|_| DataError::NotNumeric {
        row,
        field: field.to_string(),
        value: value.to_string(),
    })?;
    if !x.is_finite() {
        return Err(DataError::NonFinite {
            row,
            field: field.to_string(),
        });
    }
    Ok(x)
}

fn parse_indicator(row: usize, value: &str) -> Result<bool, DataError> {
    match value.trim() {
        "1" | "1.0" | "true" | "TRUE" | "True" => Ok(true),
        "0" | "0.0" | "false" | "FALSE" | "False" => Ok(false),
        other => Err(DataError::BadIndicator {
            row,
            value: other.to_string(),
        }),
    }
}

/// Parse and validate raw rows into a [`Dataset`]. Rows are numbered from 1
/// in error messages. A missing indicator means the event was observed.
pub fn validate_dataset(raw: &[RawRow]) -> Result<Dataset, DataError> {
    if raw.is_empty() {
        return Err(DataError::Empty);
    }
    if raw.len() < 2 {
        return Err(DataError::TooFewObservations(raw.len()));
    }
    let width = raw[0].covariates.len();
    let mut observations = Vec::with_capacity(raw.len());
    for (i, r) in raw.iter().enumerate() {
        let row = i + 1;
        if r.covariates.len() != width {
            return Err(DataError::Ragged {
                row,
                expected: width,
                found: r.covariates.len(),
            });
        }
        let response = parse_number(row, "response", &r.response)?;
        let covariates = r
            .covariates
            .iter()
            .enumerate()
            .map(|(k, v)| parse_number(row, &format!("covariate {}", k + 1), v))
            .collect::<Result<Vec<_>, _>>()?;
        let event = match &r.event {
            Some(v) => parse_indicator(row, v)?,
            None => true,
        };
        observations.push(Observation {
            response,
            covariates,
            event,
        });
    }
    Dataset::new(observations)
}
