//! BFGS with a strong Wolfe line search.

#[derive(Debug, Clone)]
pub struct BfgsOptions {
    /// Converged when the max-norm of the gradient is at most this.
    pub g_tol: f64,
    pub max_iters: usize,
    /// Budget of function/gradient evaluations.
    pub max_evals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfgsStatus {
    Converged,
    /// The line search could not find an acceptable step.
    LineSearchFailed,
    /// Iteration or evaluation budget exhausted.
    Budget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iters: usize,
    pub evals: usize,
    pub status: BfgsStatus,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

/// Strong Wolfe line search along `p` from `start`. Returns the accepted
/// point, or `None` if no acceptable step was found.
fn line_search(
    fg: &mut impl FnMut(&[f64]) -> (f64, Vec<f64>),
    start: &Point,
    p: &[f64],
    alpha0: f64,
    evals: &mut usize,
) -> Option<Point> {
    let slope0 = dot(&start.g, p);
    if slope0 >= 0.0 {
        return None;
    }
    let mut probe = |alpha: f64, evals: &mut usize| -> (Point, f64) {
        let x: Vec<f64> = start.x.iter().zip(p).map(|(x, d)| x + alpha * d).collect();
        *evals += 1;
        let (f, g) = fg(&x);
        let slope = dot(&g, p);
        (Point { x, f, g }, slope)
    };

    let mut lo = (0.0, start.f, slope0);
    let mut alpha = alpha0;
    let mut hi: Option<(f64, f64, f64)> = None;
    let mut best: Option<Point> = None;

    for _ in 0..60 {
        let (pt, slope) = probe(alpha, evals);
        let armijo = pt.f <= start.f + C1 * alpha * slope0 && pt.f.is_finite();
        if !armijo || (pt.f >= lo.1 && lo.0 > 0.0) {
            hi = Some((alpha, pt.f, slope));
        } else {
            if slope.abs() <= -C2 * slope0 {
                return Some(pt);
            }
            if pt.f < best.as_ref().map_or(start.f, |b| b.f) {
                best = Some(Point {
                    x: pt.x.clone(),
                    f: pt.f,
                    g: pt.g.clone(),
                });
            }
            if slope * (alpha - lo.0) >= 0.0 {
                hi = Some(lo);
            }
            lo = (alpha, pt.f, slope);
        }
        alpha = match hi {
            None => alpha * 2.0,
            Some((ah, fh, _)) => {
                // Safeguarded quadratic interpolation inside the bracket.
                let (al, fl, sl) = lo;
                let denom = 2.0 * (fh - fl - sl * (ah - al));
                let mut next = if denom > 0.0 {
                    al - sl * (ah - al) * (ah - al) / denom
                } else {
                    0.5 * (al + ah)
                };
                let (a, b) = if al < ah { (al, ah) } else { (ah, al) };
                let margin = 0.1 * (b - a);
                if !(next > a + margin && next < b - margin) {
                    next = 0.5 * (a + b);
                }
                if (b - a).abs() <= 1e-16 * b.abs().max(1.0) {
                    break;
                }
                next
            }
        };
    }
    best
}

/// Minimize a smooth function given `fg(x) = (f(x), ∇f(x))`.
pub fn minimize_bfgs(
    mut fg: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    x0: &[f64],
    opts: &BfgsOptions,
) -> BfgsOutcome {
    let d = x0.len();
    let (f0, g0) = fg(x0);
    let mut evals = 1;
    let mut cur = Point {
        x: x0.to_vec(),
        f: f0,
        g: g0,
    };
    // Inverse Hessian approximation, row-major.
    let mut h = vec![0.0; d * d];
    for k in 0..d {
        h[k * d + k] = 1.0;
    }
    let mut scaled = false;
    let mut iters = 0;
    let status = loop {
        if sup_norm(&cur.g) <= opts.g_tol {
            break BfgsStatus::Converged;
        }
        if iters >= opts.max_iters || evals >= opts.max_evals {
            break BfgsStatus::Budget;
        }
        let p: Vec<f64> = (0..d)
            .map(|r| -(0..d).map(|c| h[r * d + c] * cur.g[c]).sum::<f64>())
            .collect();
        let alpha0 = if scaled {
            1.0
        } else {
            // First step: move a unit distance at most.
            1.0 / sup_norm(&p).max(1.0)
        };
        let next = match line_search(&mut fg, &cur, &p, alpha0, &mut evals) {
            Some(pt) => pt,
            None => break BfgsStatus::LineSearchFailed,
        };
        iters += 1;
        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 0.0 {
            if !scaled {
                let gamma = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= gamma);
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..d)
                .map(|r| (0..d).map(|c| h[r * d + c] * y[c]).sum())
                .collect();
            let yhy = dot(&y, &hy);
            for r in 0..d {
                for c in 0..d {
                    h[r * d + c] += -rho * (hy[r] * s[c] + s[r] * hy[c])
                        + (rho * rho * yhy + rho) * s[r] * s[c];
                }
            }
        }
        let stalled = s.iter().all(|v| *v == 0.0);
        cur = next;
        if stalled {
            break BfgsStatus::LineSearchFailed;
        }
    };
    BfgsOutcome {
        x: cur.x,
        f: cur.f,
        grad: cur.g,
        iters,
        evals,
        status,
    }
}
