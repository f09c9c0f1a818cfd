mod common;

use common::*;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankcorr::simulation::{generate_design, Design, DesignSpec};
use rankcorr::*;

fn fd_jacobian(data: &Dataset, t: &ParamVector, s: &SmoothingMatrix, h: f64) -> Array2<f64> {
    let d = data.dim();
    let mut jac = Array2::zeros((d, d));
    for c in 0..d {
        let mut up = t.as_slice().to_vec();
        let mut down = up.clone();
        up[c] += h;
        down[c] -= h;
        let su = smoothed_score(data, &theta(&up), s).unwrap();
        let sd = smoothed_score(data, &theta(&down), s).unwrap();
        for r in 0..d {
            jac[[r, c]] = (su[r] - sd[r]) / (2.0 * h);
        }
    }
    jac
}

fn max_abs(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn hessian_is_jacobian_of_score_at_n50() {
    let data = random_data(50, 1, 21, 0.0);
    let s = SmoothingMatrix::identity(1);
    let t = theta(&[0.3]);
    let a = hessian_estimate(&data, &t, &s).unwrap();
    let fd = fd_jacobian(&data, &t, &s, 1e-5);
    assert!(max_abs(&a, &fd) < 5e-4, "{a} vs {fd}");
    // The relation is exact, not merely within the documented tolerance.
    assert!(max_abs(&a, &fd) < 1e-6);
}

#[test]
fn hessian_is_exactly_symmetric() {
    for seed in 0..5 {
        let data = lumpy_data(40, 3, seed);
        let a = hessian_estimate(&data, &random_theta(3, seed), &random_sigma(3, seed)).unwrap();
        assert_eq!(a, a.t());
    }
}

#[test]
fn v_hat_matches_two_loop_oracle() {
    for (seed, d) in [(1u64, 1usize), (2, 2), (3, 3)] {
        let data = random_data(30, d, seed, if d == 2 { 0.3 } else { 0.0 });
        let t = random_theta(d, seed);
        let s = random_sigma(d, seed);
        let v = score_variance_estimate(&data, &t, &s).unwrap();
        let oracle = oracle_v_hat(&data, &t, &s);
        assert!(max_abs(&v, &oracle) < 1e-12, "{v} vs {oracle}");
    }
    let lumpy = lumpy_data(30, 2, 9);
    let (t, s) = (random_theta(2, 9), random_sigma(2, 9));
    let v = score_variance_estimate(&lumpy, &t, &s).unwrap();
    assert!(max_abs(&v, &oracle_v_hat(&lumpy, &t, &s)) < 1e-12);
}

#[test]
fn v_hat_is_psd_under_random_probes() {
    let data = random_data(60, 2, 4, 0.2);
    let v = score_variance_estimate(&data, &random_theta(2, 4), &SmoothingMatrix::identity(2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..100 {
        let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let q: f64 = (0..2).map(|r| (0..2).map(|c| x[r] * v[[r, c]] * x[c]).sum::<f64>()).sum();
        assert!(q >= -1e-15);
    }
}

#[test]
fn sandwich_is_invariant_to_monotone_response_transforms() {
    let data = random_data(60, 2, 13, 0.25);
    let t = random_theta(2, 13);
    let s = random_sigma(2, 13);
    let base = sandwich_covariance(&data, &t, &s).unwrap();
    let other = data.map_response(|y| (2.0 * y).exp() + 1.0).unwrap();
    assert_eq!(sandwich_covariance(&other, &t, &s).unwrap(), base);
}

#[test]
fn censored_formulas_reduce_bit_identically() {
    for seed in 0..5 {
        let data = random_data(50, 1 + seed as usize % 2, seed, 0.0);
        assert!(!data.is_censored());
        let d = data.dim();
        let (t, s) = (random_theta(d, seed), random_sigma(d, seed));
        assert_eq!(
            sandwich_parts_with(&data, &t, &s, Criterion::Rank).unwrap(),
            sandwich_parts_with(&data, &t, &s, Criterion::PartialRank).unwrap()
        );
    }
}

#[test]
fn hessian_negative_definite_at_fitted_design_i() {
    let data = generate_design(&DesignSpec::new(Design::I, 500).unwrap(), 3);
    let result = fit(&data, &FitOptions::default()).unwrap();
    let s = SmoothingMatrix::new(result.sigma_star.clone()).unwrap();
    let a = hessian_estimate(&data, &result.theta_hat, &s).unwrap();
    assert!(linalg::cholesky(&(-&a)).is_ok(), "{a}");
}

#[test]
fn sandwich_scale_at_n2000() {
    // Standard error implied by the sandwich at the step estimate, on the
    // scale of θ̂ itself.
    for seed in [1u64, 2] {
        let data = generate_design(&DesignSpec::new(Design::I, 2000).unwrap(), seed);
        let step = maximize_step_objective(&data, &FitOptions::default()).unwrap();
        let d = sandwich_covariance(&data, &step.theta, &SmoothingMatrix::identity(1)).unwrap();
        let se = (d[[0, 0]] / 2000.0).sqrt();
        println!("seed {seed}: se {se}");
        assert!((se - 0.0144).abs() <= 0.2 * 0.0144, "se {se}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn v_hat_psd_and_a_symmetric(n in 3usize..=40, d in 1usize..=3, seed in 0u64..10_000) {
        let data = lumpy_data(n, d, seed);
        let (t, s) = (random_theta(d, seed), random_sigma(d, seed));
        let v = score_variance_estimate(&data, &t, &s).unwrap();
        let (values, _) = linalg::symmetric_eigen(&v).unwrap();
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(values.iter().all(|&l| l >= -1e-10 * scale.max(1e-300)));
        let a = hessian_estimate(&data, &t, &s).unwrap();
        prop_assert_eq!(a.clone(), a.t().to_owned());
    }

    #[test]
    fn hessian_matches_jacobian(n in 5usize..=60, d in 1usize..=3, seed in 0u64..10_000) {
        let data = random_data(n, d, seed, 0.3);
        let (t, s) = (random_theta(d, seed), random_sigma(d, seed));
        let a = hessian_estimate(&data, &t, &s).unwrap();
        let fd = fd_jacobian(&data, &t, &s, 1e-5);
        prop_assert!(max_abs(&a, &fd) < 5e-4);
    }
}
