use nalgebra::{DMatrix, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::eigenvalues;
use crate::operator::{ensure_square, spectral_norm, Matrix};
use crate::semigroup::stability_margin;

/// Hautus test: `rank [A - lI | B] = n` for every eigenvalue `l` of `A` that
/// is not exponentially stable. Ranks come from singular values with
/// threshold `1e-10 |A|_2`.
pub fn hautus_stabilizable(a: &Matrix, b: &Matrix) -> Result<bool> {
    let threshold = 1e-10 * spectral_norm(a)?;
    Ok(stabilizability_margin(a, b)? > threshold)
}

/// Smallest `sigma_n([A - lI | B])` over the eigenvalues `l` of `A` that are
/// not exponentially stable; `+inf` when `A` is stable. This is the distance
/// of the pencil to losing rank at an unstable mode.
pub fn stabilizability_margin(a: &Matrix, b: &Matrix) -> Result<f64> {
    ensure_square(a, "hautus A")?;
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::dims("hautus B rows", n, b.nrows()));
    }
    let margin = stability_margin(a)?;
    let m = b.ncols();
    let mut smallest = f64::INFINITY;
    for lambda in eigenvalues(a)? {
        if lambda.re < -margin || lambda.im < 0.0 {
            // stable, or the conjugate of a pair already tested
            continue;
        }
        let pencil = DMatrix::<Complex64>::from_fn(n, n + m, |i, j| {
            if j < n {
                let v = Complex64::new(a[(i, j)], 0.0);
                if i == j {
                    v - lambda
                } else {
                    v
                }
            } else {
                Complex64::new(b[(i, j - n)], 0.0)
            }
        });
        let svd = SVD::try_new(pencil, false, false, f64::EPSILON, 100_000)
            .ok_or_else(|| Error::Eigensolver("Hautus rank test".into()))?;
        // singular values of an n x (n+m) matrix: exactly n of them
        let sigma_n = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
        smallest = smallest.min(sigma_n);
    }
    Ok(smallest)
}

/// [`stabilizability_margin`] of the dual pair `(A^T, C^T)`.
pub fn detectability_margin(c: &Matrix, a: &Matrix) -> Result<f64> {
    ensure_square(a, "hautus A")?;
    if c.ncols() != a.nrows() {
        return Err(Error::dims("hautus C columns", a.nrows(), c.ncols()));
    }
    stabilizability_margin(&a.transpose(), &c.transpose())
}

/// Dual test: `(C, A)` is detectable iff `(A^T, C^T)` is stabilizable.
pub fn hautus_detectable(c: &Matrix, a: &Matrix) -> Result<bool> {
    ensure_square(a, "hautus A")?;
    if c.ncols() != a.nrows() {
        return Err(Error::dims("hautus C columns", a.nrows(), c.ncols()));
    }
    hautus_stabilizable(&a.transpose(), &c.transpose())
}
