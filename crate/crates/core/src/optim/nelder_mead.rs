//! Nelder–Mead simplex search with the standard coefficients
//! (reflection 1, expansion 2, contraction 1/2, shrink 1/2).

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Initial simplex edge along each coordinate.
    pub initial_step: Vec<f64>,
    pub max_evals: usize,
    /// Stop when the spread of function values across the simplex is at most
    /// this.
    pub f_tol: f64,
    /// Stop when every vertex is within this distance (max norm) of the best.
    pub x_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimize `f` from `x0`.
///
/// Ties between vertices are broken in favour of the earlier vertex, so the
/// search is deterministic.
pub fn minimize_nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> NelderMeadOutcome {
    let d = x0.len();
    assert_eq!(opts.initial_step.len(), d, "initial_step length");
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let f0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), f0));
    for k in 0..d {
        let mut x = x0.to_vec();
        x[k] += opts.initial_step[k];
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }

    let mut converged = false;
    while evals < opts.max_evals {
        // Stable sort keeps earlier vertices first among equal values.
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[d].1;
        let spread = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= opts.f_tol && spread <= opts.x_tol {
            converged = true;
            break;
        }
        if spread <= opts.x_tol * 1e-3 {
            // Collapsed simplex on a flat or discontinuous surface.
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; d];
        for (x, _) in &simplex[..d] {
            for k in 0..d {
                centroid[k] += x[k] / d as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[d].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst {
            let xc = along(0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < fr.min(worst) {
            simplex[d] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for v in simplex.iter_mut().skip(1) {
            for k in 0..d {
                v.0[k] = x_best[k] + 0.5 * (v.0[k] - x_best[k]);
            }
            v.1 = eval(&v.0, &mut evals);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    NelderMeadOutcome {
        x,
        f,
        evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(d: usize) -> NelderMeadOptions {
        NelderMeadOptions {
            initial_step: vec![0.5; d],
            max_evals: 5000,
            f_tol: 1e-14,
            x_tol: 1e-9,
        }
    }

    #[test]
    fn quadratic_bowl() {
        let out = minimize_nelder_mead(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2),
            &[0.0, 0.0],
            &opts(2),
        );
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock() {
        let out = minimize_nelder_mead(
            |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            &[-1.2, 1.0],
            &opts(2),
        );
        assert!(out.f < 1e-10, "{out:?}");
    }

    #[test]
    fn step_function_terminates() {
        let out = minimize_nelder_mead(|x| -((x[0] > 0.3 && x[0] < 0.4) as i32 as f64), &[0.0], &opts(1));
        assert!(out.evals < 5000);
    }

    #[test]
    fn respects_budget() {
        let out = minimize_nelder_mead(
            |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            &[-1.2, 1.0],
            &NelderMeadOptions {
                max_evals: 20,
                ..opts(2)
            },
        );
        assert!(!out.converged);
        assert!(out.evals <= 20 + 3);
    }
}
