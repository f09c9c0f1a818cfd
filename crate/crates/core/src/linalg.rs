//! Small dense linear algebra for the `d x d` matrices of the sandwich.
//!
//! `d` is tiny (one to a handful), so everything here is straightforward
//! O(d³) code on `ndarray` matrices.

use ndarray::Array2;

use crate::error::NumericalError;

/// Matrices whose 1-norm condition number exceeds this are treated as
/// singular.
pub const MAX_CONDITION: f64 = 1e12;

fn check_square(m: &Array2<f64>) -> Result<usize, NumericalError> {
    let (rows, cols) = m.dim();
    if rows != cols || rows == 0 {
        return Err(NumericalError::Shape {
            rows,
            cols,
            expected: rows.max(1),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(NumericalError::NonFinite);
    }
    Ok(rows)
}

/// Lower-triangular Cholesky factor `L` with `m = L L'`.
///
/// Only the lower triangle of `m` is read.
pub fn cholesky(m: &Array2<f64>) -> Result<Array2<f64>, NumericalError> {
    let d = check_square(m)?;
    let mut l = Array2::<f64>::zeros((d, d));
    for j in 0..d {
        let mut pivot = m[[j, j]];
        for k in 0..j {
            pivot -= l[[j, k]] * l[[j, k]];
        }
        if pivot <= 0.0 || !pivot.is_finite() {
            return Err(NumericalError::NotPositiveDefinite { index: j, pivot });
        }
        let root = pivot.sqrt();
        l[[j, j]] = root;
        for i in j + 1..d {
            let mut s = m[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / root;
        }
    }
    Ok(l)
}

fn inverse_from_cholesky(l: &Array2<f64>) -> Array2<f64> {
    let d = l.nrows();
    // Invert L by forward substitution, then m⁻¹ = L⁻ᵀ L⁻¹.
    let mut linv = Array2::<f64>::zeros((d, d));
    for col in 0..d {
        for i in col..d {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                s -= l[[i, k]] * linv[[k, col]];
            }
            linv[[i, col]] = s / l[[i, i]];
        }
    }
    let mut inv = linv.t().dot(&linv);
    symmetrize(&mut inv);
    inv
}

/// Inverse by LU with partial pivoting. Returns `None` on an exactly zero
/// pivot.
fn lu_inverse(m: &Array2<f64>) -> Option<Array2<f64>> {
    let d = m.nrows();
    let mut a = m.clone();
    let mut inv = Array2::<f64>::eye(d);
    for col in 0..d {
        let p = (col..d)
            .max_by(|&x, &y| a[[x, col]].abs().total_cmp(&a[[y, col]].abs()))
            .expect("non-empty range");
        if a[[p, col]] == 0.0 {
            return None;
        }
        if p != col {
            for k in 0..d {
                a.swap([p, k], [col, k]);
                inv.swap([p, k], [col, k]);
            }
        }
        let pivot = a[[col, col]];
        for k in 0..d {
            a[[col, k]] /= pivot;
            inv[[col, k]] /= pivot;
        }
        for r in 0..d {
            if r == col {
                continue;
            }
            let f = a[[r, col]];
            if f != 0.0 {
                for k in 0..d {
                    a[[r, k]] -= f * a[[col, k]];
                    inv[[r, k]] -= f * inv[[col, k]];
                }
            }
        }
    }
    Some(inv)
}

/// Matrix 1-norm (maximum absolute column sum).
pub fn norm1(m: &Array2<f64>) -> f64 {
    m.columns()
        .into_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse of a symmetric matrix.
///
/// Uses Cholesky when `m` is positive definite and LU with partial pivoting
/// otherwise (so negative definite and indefinite input also work). Fails
/// with [`NumericalError::Singular`] when the 1-norm condition number
/// exceeds [`MAX_CONDITION`].
pub fn invert_spd(m: &Array2<f64>) -> Result<Array2<f64>, NumericalError> {
    check_square(m)?;
    let inv = match cholesky(m) {
        Ok(l) => inverse_from_cholesky(&l),
        Err(_) => match lu_inverse(m) {
            Some(inv) => inv,
            None => {
                return Err(NumericalError::Singular {
                    condition: f64::INFINITY,
                })
            }
        },
    };
    let condition = norm1(m) * norm1(&inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(NumericalError::Singular {
            condition: if condition.is_finite() {
                condition
            } else {
                f64::INFINITY
            },
        });
    }
    Ok(inv)
}

/// Replace `m` by `(m + m') / 2`.
pub fn symmetrize(m: &mut Array2<f64>) {
    let d = m.nrows();
    for r in 0..d {
        for c in 0..r {
            let avg = 0.5 * (m[[r, c]] + m[[c, r]]);
            m[[r, c]] = avg;
            m[[c, r]] = avg;
        }
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(values, vectors)` with eigenvectors in the columns.
pub fn symmetric_eigen(m: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>), NumericalError> {
    let d = check_square(m)?;
    let mut a = m.clone();
    symmetrize(&mut a);
    let mut v = Array2::<f64>::eye(d);
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|r| (0..d).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| a[[r, c]] * a[[r, c]])
            .sum();
        let scale: f64 = a.iter().map(|x| x * x).sum();
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                if a[[p, q]] == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    Ok(((0..d).map(|k| a[[k, k]]).collect(), v))
}

/// Floor the eigenvalues of a symmetric matrix at `floor` and rebuild it.
pub fn floor_eigenvalues(m: &Array2<f64>, floor: f64) -> Result<Array2<f64>, NumericalError> {
    let (values, vectors) = symmetric_eigen(m)?;
    let d = values.len();
    let mut out = Array2::<f64>::zeros((d, d));
    for (k, &lambda) in values.iter().enumerate() {
        let lambda = lambda.max(floor);
        for r in 0..d {
            for c in 0..d {
                out[[r, c]] += lambda * vectors[[r, k]] * vectors[[c, k]];
            }
        }
    }
    symmetrize(&mut out);
    Ok(out)
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
