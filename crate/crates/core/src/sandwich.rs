//! Sandwich variance estimation: the Hessian-type matrix `Â`, the score
//! variance `V̂` and `D̂ = Â⁻¹ V̂ Â⁻¹`.
//!
//! `D̂` estimates the covariance of `√n (θ̂ - θ₀)`, which is the scale on
//! which it is fed back as the smoothing matrix. The covariance of `θ̂`
//! itself is `D̂ / n`.

use ndarray::Array2;
use rayon::prelude::*;

use crate::accumulate::NeumaierVec;
use crate::error::Result;
use crate::linalg;
use crate::model::{Criterion, Dataset, ParamVector, SmoothingMatrix};
use crate::normal;
use crate::objectives::PairContext;

/// The three matrices of the sandwich.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichParts {
    pub a_hat: Array2<f64>,
    pub v_hat: Array2<f64>,
    pub d_hat: Array2<f64>,
}

fn packed_len(d: usize) -> usize {
    d * (d + 1) / 2
}

fn unpack(d: usize, packed: &[f64]) -> Array2<f64> {
    let mut m = Array2::<f64>::zeros((d, d));
    let mut p = 0;
    for r in 0..d {
        for c in 0..=r {
            m[[r, c]] = packed[p];
            m[[c, r]] = packed[p];
            p += 1;
        }
    }
    m
}

impl PairContext<'_> {
    /// Row `i`'s share of `Σ_{j>i} H_ij φ̇(z) g g'` in packed lower-triangular
    /// form, with `g = √n X_ij⁽¹⁾ / σ_ij`.
    fn row_hessian(&self, i: usize, diff: &mut [f64], g: &mut [f64]) -> Vec<f64> {
        let d = self.data.dim();
        let mut acc = NeumaierVec::zeros(packed_len(d));
        for j in i + 1..self.data.n() {
            let h = self.sign(i, j);
            if h == 0.0 {
                continue;
            }
            let (index, scale) = self.geometry(i, j, diff);
            if scale <= 0.0 {
                continue;
            }
            let z = self.root_n * index / scale;
            let w = h * normal::pdf_derivative(z);
            for k in 0..d {
                g[k] = self.root_n * diff[k] / scale;
            }
            let mut p = 0;
            for r in 0..d {
                for c in 0..=r {
                    acc.add_at(p, w * g[r] * g[c]);
                    p += 1;
                }
            }
        }
        acc.totals()
    }

    /// `ψ_i = Σ_{j≠i} H_ij φ(z_ij) √n X_ij⁽¹⁾ / σ_ij`.
    fn psi(&self, i: usize, diff: &mut [f64]) -> Vec<f64> {
        let d = self.data.dim();
        let mut acc = NeumaierVec::zeros(d);
        for j in 0..self.data.n() {
            if j == i {
                continue;
            }
            let h = self.sign(i, j);
            if h == 0.0 {
                continue;
            }
            let (index, scale) = self.geometry(i, j, diff);
            if scale <= 0.0 {
                continue;
            }
            let z = self.root_n * index / scale;
            let w = h * normal::pdf(z) * self.root_n / scale;
            for k in 0..d {
                acc.add_at(k, w * diff[k]);
            }
        }
        acc.totals()
    }

    pub fn hessian(&self) -> Array2<f64> {
        let d = self.data.dim();
        let n = self.data.n() as f64;
        let rows: Vec<Vec<f64>> = (0..self.data.n())
            .into_par_iter()
            .map_init(
                || (vec![0.0; d + 1], vec![0.0; d]),
                |(diff, g), i| self.row_hessian(i, diff, g),
            )
            .collect();
        let mut acc = NeumaierVec::zeros(packed_len(d));
        rows.iter().for_each(|r| acc.add_slice(r));
        let norm = n * (n - 1.0);
        let packed: Vec<f64> = acc.totals().into_iter().map(|x| x / norm).collect();
        unpack(d, &packed)
    }

    pub fn score_variance(&self) -> Array2<f64> {
        let d = self.data.dim();
        let n = self.data.n() as f64;
        let psis: Vec<Vec<f64>> = (0..self.data.n())
            .into_par_iter()
            .map_init(|| vec![0.0; d + 1], |diff, i| self.psi(i, diff))
            .collect();
        let mut acc = NeumaierVec::zeros(packed_len(d));
        for psi in &psis {
            let mut p = 0;
            for r in 0..d {
                for c in 0..=r {
                    acc.add_at(p, psi[r] * psi[c]);
                    p += 1;
                }
            }
        }
        let norm = n * n * n;
        let packed: Vec<f64> = acc.totals().into_iter().map(|x| x / norm).collect();
        unpack(d, &packed)
    }
}

/// `Â_n = 1/(2n(n-1)) Σ_{i≠j} H_ij φ̇(z_ij) g_ij g_ij'` with
/// `z_ij = √n X_ij'β/σ_ij` and `g_ij = √n X_ij⁽¹⁾/σ_ij`.
///
/// This is exactly the Jacobian of [`smoothed_score`](crate::smoothed_score).
pub fn hessian_estimate(
    data: &Dataset,
    theta: &ParamVector,
    sigma: &SmoothingMatrix,
) -> Result<Array2<f64>> {
    hessian_estimate_with(data, theta, sigma, data.criterion())
}

pub fn hessian_estimate_with(
    data: &Dataset,
    theta: &ParamVector,
    sigma: &SmoothingMatrix,
    criterion: Criterion,
) -> Result<Array2<f64>> {
    Ok(PairContext::new(data, theta, sigma, criterion)?.hessian())
}

/// `V̂_n = n⁻³ Σ_i ψ_i ψ_i'` with `ψ_i = Σ_{j≠i} H_ij φ(z_ij) g_ij`.
pub fn score_variance_estimate(
    data: &Dataset,
    theta: &ParamVector,
    sigma: &SmoothingMatrix,
) -> Result<Array2<f64>> {
    score_variance_estimate_with(data, theta, sigma, data.criterion())
}

pub fn score_variance_estimate_with(
    data: &Dataset,
    theta: &ParamVector,
    sigma: &SmoothingMatrix,
    criterion: Criterion,
) -> Result<Array2<f64>> {
    Ok(PairContext::new(data, theta, sigma, criterion)?.score_variance())
}

/// `Â⁻¹ V̂ Â⁻¹`, symmetrized.
pub fn combine(a_hat: &Array2<f64>, v_hat: &Array2<f64>) -> Result<Array2<f64>> {
    let a_inv = linalg::invert_spd(a_hat)?;
    let mut d_hat = a_inv.dot(v_hat).dot(&a_inv);
    linalg::symmetrize(&mut d_hat);
    Ok(d_hat)
}

/// All three sandwich matrices.
pub fn sandwich_parts(
    data: &Dataset,
    theta: &ParamVector,
    sigma: &SmoothingMatrix,
) -> Result<SandwichParts> {
    sandwich_parts_with(data, theta, sigma, data.criterion())
}

pub fn sandwich_parts_with(
    data: &Dataset,
    theta: &ParamVector,
    sigma: &SmoothingMatrix,
    criterion: Criterion,
) -> Result<SandwichParts> {
    let ctx = PairContext::new(data, theta, sigma, criterion)?;
    let a_hat = ctx.hessian();
    let v_hat = ctx.score_variance();
    let d_hat = combine(&a_hat, &v_hat)?;
    Ok(SandwichParts {
        a_hat,
        v_hat,
        d_hat,
    })
}

/// `D̂_n = Â⁻¹ V̂ Â⁻¹`, the estimated covariance of `√n (θ̂ - θ₀)`.
///
/// Fails with a [`NumericalError::Singular`](crate::NumericalError::Singular)
/// when `Â` is numerically singular.
pub fn sandwich_covariance(
    data: &Dataset,
    theta: &ParamVector,
    sigma: &SmoothingMatrix,
) -> Result<Array2<f64>> {
    Ok(sandwich_parts(data, theta, sigma)?.d_hat)
}
