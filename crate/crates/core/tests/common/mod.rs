#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankcorr::{Dataset, Observation, ParamVector, SmoothingMatrix};

pub fn theta(v: &[f64]) -> ParamVector {
    ParamVector::new(v.to_vec()).unwrap()
}

/// Continuous random data: no ties in Y or in any covariate.
pub fn random_data(n: usize, d: usize, seed: u64, censor_prob: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Dataset::new(
        (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..=d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let index: f64 = x.iter().sum();
                let y = index + rng.random_range(-1.0..1.0);
                Observation::censored(y, x, !rng.random_bool(censor_prob))
            })
            .collect(),
    )
    .unwrap()
}

/// Random data with some degenerate pairs and tied responses.
pub fn lumpy_data(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Dataset::new(
        (0..n)
            .map(|_| {
                let mut x: Vec<f64> = (0..d).map(|_| rng.random_range(0..3) as f64).collect();
                x.push(rng.random_range(-2.0..2.0));
                let y = rng.random_range(0..6) as f64;
                Observation::censored(y, x, rng.random_bool(0.7))
            })
            .collect(),
    )
    .unwrap()
}

pub fn random_theta(d: usize, seed: u64) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    theta(&(0..d).map(|_| rng.random_range(-1.5..1.5)).collect::<Vec<_>>())
}

pub fn random_sigma(d: usize, seed: u64) -> SmoothingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = Array2::from_shape_fn((d, d), |_| rng.random_range(-1.0..1.0));
    let m = b.dot(&b.t()) + Array2::<f64>::eye(d) * 0.5;
    let mut sym = m.clone();
    for r in 0..d {
        for c in 0..d {
            sym[[r, c]] = 0.5 * (m[[r, c]] + m[[c, r]]);
        }
    }
    SmoothingMatrix::new(sym).unwrap()
}

fn beta(t: &ParamVector) -> Vec<f64> {
    let mut b = t.as_slice().to_vec();
    b.push(1.0);
    b
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Ordered-pair double loop for the step objectives.
pub fn oracle_step(data: &Dataset, t: &ParamVector, partial: bool) -> f64 {
    let b = beta(t);
    let n = data.n();
    let mut count = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let yi = data.response()[i];
            let yj = data.response()[j];
            let w = yi > yj && (!partial || data.events()[j]);
            if w && dot(data.covariates(i), &b) > dot(data.covariates(j), &b) {
                count += 1;
            }
        }
    }
    count as f64 / (n * (n - 1)) as f64
}

fn phi_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn phi_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `H_ij` straight from its definition.
pub fn oracle_h(data: &Dataset, i: usize, j: usize) -> f64 {
    let (yi, yj) = (data.response()[i], data.response()[j]);
    let (di, dj) = (data.events()[i] as u8 as f64, data.events()[j] as u8 as f64);
    if data.is_censored() {
        dj * ((yi > yj) as u8 as f64) - di * ((yj > yi) as u8 as f64)
    } else {
        ((yi > yj) as i8 - (yj > yi) as i8) as f64
    }
}

fn pair_geometry(data: &Dataset, t: &ParamVector, s: &SmoothingMatrix, i: usize, j: usize) -> (f64, f64, Vec<f64>) {
    let d = data.dim();
    let diff: Vec<f64> = data
        .covariates(i)
        .iter()
        .zip(data.covariates(j))
        .map(|(a, b)| a - b)
        .collect();
    let index = dot(&diff, &beta(t));
    let m = s.matrix();
    let mut q = 0.0;
    for r in 0..d {
        for c in 0..d {
            q += diff[r] * m[[r, c]] * diff[c];
        }
    }
    (index, q.sqrt(), diff[..d].to_vec())
}

/// Ordered-pair double loop for the smoothed objective, plain summation.
pub fn oracle_smoothed(data: &Dataset, t: &ParamVector, s: &SmoothingMatrix) -> f64 {
    let n = data.n();
    let root_n = (n as f64).sqrt();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (yi, yj) = (data.response()[i], data.response()[j]);
            let w = yi > yj && (!data.is_censored() || data.events()[j]);
            if !w {
                continue;
            }
            let (index, scale, _) = pair_geometry(data, t, s, i, j);
            total += if scale > 0.0 {
                phi_cdf(root_n * index / scale)
            } else {
                (index > 0.0) as u8 as f64
            };
        }
    }
    total / (n * (n - 1)) as f64
}

/// `(1/n³) Σ_i ψ_i ψ_i'` with each `ψ_i` computed by its own inner loop.
pub fn oracle_v_hat(data: &Dataset, t: &ParamVector, s: &SmoothingMatrix) -> Array2<f64> {
    let n = data.n();
    let d = data.dim();
    let root_n = (n as f64).sqrt();
    let mut v = Array2::<f64>::zeros((d, d));
    for i in 0..n {
        let mut psi = vec![0.0; d];
        for j in 0..n {
            if j == i {
                continue;
            }
            let (index, scale, x1) = pair_geometry(data, t, s, i, j);
            if scale == 0.0 {
                continue;
            }
            let w = oracle_h(data, i, j) * phi_pdf(root_n * index / scale) * root_n / scale;
            for k in 0..d {
                psi[k] += w * x1[k];
            }
        }
        for r in 0..d {
            for c in 0..d {
                v[[r, c]] += psi[r] * psi[c];
            }
        }
    }
    v / (n as f64).powi(3)
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[k] += h;
            down[k] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}
