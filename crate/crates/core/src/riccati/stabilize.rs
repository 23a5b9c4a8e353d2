use crate::error::{Error, Result};
use crate::linalg::RealSchur;
use crate::lyapunov::{solve_lyapunov, LyapunovMethod};
use crate::operator::{
    ensure_square, is_psd, pseudo_inverse, ConeTolerances, Matrix, SymOperator,
};
use crate::semigroup::{spectral_abscissa, stability_margin};

use super::hautus::hautus_stabilizable;

const PINV_RCOND: f64 = 1e-12;

/// A gain `K` (m x n) with `A - BK` exponentially stable.
///
/// Stable `A` short-circuits to `K = 0`. Otherwise the Bass construction is
/// applied to the block of an ordered real Schur form holding the slow and
/// unstable modes, then to the unstable modes alone, and finally to the full
/// system; the first closed loop that passes verification wins.
pub fn stabilize(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    Ok(stabilizing_gains(a, b)?.swap_remove(0))
}

/// Every construction of [`stabilize`] whose closed loop verifies, in the
/// same order. Never empty.
pub fn stabilizing_gains(a: &Matrix, b: &Matrix) -> Result<Vec<Matrix>> {
    ensure_square(a, "stabilize A")?;
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::dims("stabilize B rows", n, b.nrows()));
    }
    let m = b.ncols();
    if spectral_abscissa(a)?.is_stable {
        return Ok(vec![Matrix::zeros(m, n)]);
    }
    if !hautus_stabilizable(a, b)? {
        return Err(Error::NotStabilizable);
    }

    let mut abscissa = f64::INFINITY;
    let mut gains = Vec::new();
    let mut candidates = Vec::new();
    for split in [Split::Slow, Split::Unstable] {
        for factor in SEPARATED_SHIFTS {
            candidates.push(separated_gain(a, b, split, factor));
        }
    }
    candidates.push(bass_gain(a, b, bass_shift(a)));
    for k in candidates.into_iter().flatten() {
        let report = spectral_abscissa(&(a - b * &k))?;
        if report.is_stable {
            gains.push(k);
        } else {
            abscissa = abscissa.min(report.abscissa);
        }
    }
    if gains.is_empty() {
        return Err(Error::StabilizationFailed { abscissa });
    }
    Ok(gains)
}

/// `beta = 1.1 |A|_F + 1`.
fn bass_shift(a: &Matrix) -> f64 {
    1.1 * a.norm() + 1.0
}

/// Bass: solve `(A + beta I) Z + Z (A + beta I)^T = 2 B B^T` and set
/// `K = B^T Z^+`; the closed-loop spectrum lies left of `-beta` when
/// `(A, B)` is controllable.
fn bass_gain(a: &Matrix, b: &Matrix, beta: f64) -> Result<Matrix> {
    let n = a.nrows();
    let shifted = a + Matrix::identity(n, n) * beta;
    // (A + bI) Z + Z (A + bI)^T = 2BB^T  <=>  L^T Z + Z L = -2BB^T, L = -(A + bI)^T
    let rhs = SymOperator::symmetrized(&(b * b.transpose() * 2.0));
    let z = solve_lyapunov(&(-shifted.transpose()), &rhs, LyapunovMethod::Schur)?;
    Ok(b.transpose() * pseudo_inverse(z.matrix(), PINV_RCOND)?)
}

#[derive(Clone, Copy)]
enum Split {
    /// Modes with `Re l >= -beta` are moved.
    Slow,
    /// Only the unstable modes are moved; nearly uncontrollable slow
    /// stable modes would make the slow-block Gramian singular.
    Unstable,
}

/// Bass on part of the spectrum: with `A = U T U^T` ordered so the block of
/// modes left alone leads, `K = [0 | K_2] U^T` where `K_2` is the Bass gain
/// of `(T_22, B_2)`. The shift `beta` is `factor` times the largest modulus
/// among the unstable eigenvalues (at least one). The closed loop stays block
/// triangular, so its spectrum is that of `T_11` and `T_22 - B_2 K_2`.
fn separated_gain(a: &Matrix, b: &Matrix, split: Split, factor: f64) -> Result<Matrix> {
    let n = a.nrows();
    let margin = stability_margin(a)?;
    let rho_unstable = crate::linalg::eigenvalues(a)?
        .iter()
        .filter(|z| z.re >= -margin)
        .map(|z| z.norm())
        .fold(1.0, f64::max);
    let beta = factor * rho_unstable;
    let mut schur = RealSchur::new(a)?;
    let k_stable = match split {
        Split::Slow => schur.reorder(|z| z.re < -beta)?,
        Split::Unstable => schur.reorder(|z| z.re < -margin)?,
    };
    let r = n - k_stable;
    let t22 = schur.t.view((k_stable, k_stable), (r, r)).into_owned();
    let ub = schur.q.transpose() * b;
    let b2 = ub.view((k_stable, 0), (r, b.ncols())).into_owned();
    let k2 = bass_gain(&t22, &b2, beta)?;
    let mut k_schur = Matrix::zeros(b.ncols(), n);
    k_schur.view_mut((0, k_stable), (b.ncols(), r)).copy_from(&k2);
    Ok(k_schur * schur.q.transpose())
}

/// Shifts tried, as multiples of the largest unstable modulus; the first is
/// the default construction.
const SEPARATED_SHIFTS: [f64; 4] = [0.5, 0.25, 1.0, 2.0];

/// `P0` solving `(A - BK)^T P0 + P0 (A - BK) = -(C^T C + K^T K)`.
///
/// Verifies that `P0` is PSD and that `A - B B^T P0` is exponentially stable.
pub fn initial_guess(a: &Matrix, b: &Matrix, c: &Matrix, k: &Matrix) -> Result<SymOperator> {
    ensure_square(a, "initial_guess A")?;
    let n = a.nrows();
    if b.nrows() != n || c.ncols() != n || k.shape() != (b.ncols(), n) {
        return Err(Error::dims(
            "initial_guess",
            format!("B {n}xm, C px{n}, K mx{n}"),
            format!(
                "B {}x{}, C {}x{}, K {}x{}",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                k.nrows(),
                k.ncols()
            ),
        ));
    }
    let a_k = a - b * k;
    let report = spectral_abscissa(&a_k)?;
    if !report.is_stable {
        return Err(Error::InvalidParameter(format!(
            "gain K does not stabilize A - BK (abscissa {:.3e})",
            report.abscissa
        )));
    }
    let rhs = SymOperator::symmetrized(&(c.transpose() * c + k.transpose() * k));
    let p0 = solve_lyapunov(&a_k, &rhs, LyapunovMethod::Schur)?;
    if !is_psd(&p0, &ConeTolerances::default())? {
        return Err(Error::ConeViolation {
            min_eigenvalue: p0.min_eigenvalue()?,
        });
    }
    let closed = spectral_abscissa(&(a - b * b.transpose() * p0.matrix()))?;
    if !closed.is_stable {
        return Err(Error::InitialGuessNotStabilizing {
            abscissa: closed.abscissa,
        });
    }
    Ok(p0)
}

/// Gain for a dichotomous `A = diag(A_minus, A_plus)`: `K` solves
/// `B K = 0 (+) (A_plus + I)` in the least-squares sense and must do so
/// exactly (relative `1e-10`), which holds iff `X_plus` lies in `Ran B`.
/// Then `A - BK = diag(A_minus, -I)`.
pub fn dichotomous_gain(a_minus: &Matrix, a_plus: &Matrix, b: &Matrix) -> Result<Matrix> {
    ensure_square(a_minus, "A_minus")?;
    ensure_square(a_plus, "A_plus")?;
    let (nm, np) = (a_minus.nrows(), a_plus.nrows());
    let n = nm + np;
    if b.nrows() != n {
        return Err(Error::dims("dichotomous_gain B rows", n, b.nrows()));
    }
    if nm > 0 && !spectral_abscissa(a_minus)?.is_stable {
        return Err(Error::InvalidParameter(
            "A_minus must be exponentially stable".into(),
        ));
    }
    let m = b.ncols();
    if np == 0 {
        return Ok(Matrix::zeros(m, n));
    }
    let shifted = a_plus + Matrix::identity(np, np);
    let mut target = Matrix::zeros(n, n);
    target.view_mut((nm, nm), (np, np)).copy_from(&shifted);
    let k = pseudo_inverse(b, PINV_RCOND)? * &target;
    let residual = (b * &k - &target).norm();
    let threshold = 1e-10 * shifted.norm();
    if residual > threshold {
        return Err(Error::RangeConditionFailed {
            residual,
            threshold,
        });
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Vector;
    use approx::assert_relative_eq;

    fn s(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    #[test]
    fn stable_a_gets_zero_gain() {
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 5.0, 0.0, -2.0]);
        let b = Matrix::from_column_slice(2, 1, &[1.0, 1.0]);
        assert_eq!(stabilize(&a, &b).unwrap(), Matrix::zeros(1, 2));
    }

    #[test]
    fn scalar_bass_arithmetic() {
        let one = s(1.0);
        assert_relative_eq!(bass_shift(&one), 2.1, epsilon = 1e-15);
        let k = bass_gain(&one, &one, bass_shift(&one)).unwrap();
        assert_relative_eq!(k[(0, 0)], 3.1, epsilon = 1e-12);
        // slow-block Bass: beta = 0.5, 2 (1 + beta) z = 2, K = 1/z
        let k = stabilize(&one, &one).unwrap();
        assert_relative_eq!(k[(0, 0)], 1.5, epsilon = 1e-12);
        assert_eq!(stabilize(&s(1.0), &s(0.0)), Err(Error::NotStabilizable));
    }

    #[test]
    fn uncontrollable_stable_mode() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, 1.0]));
        let b = Matrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let k = stabilize(&a, &b).unwrap();
        assert!(spectral_abscissa(&(&a - &b * &k)).unwrap().abscissa < 0.0);
    }

    #[test]
    fn separated_gain_handles_uncontrollable_modes() {
        let a = Matrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.0, 0.0, 0.5, 1.0, 0.0, -1.0, 0.5]);
        let b = Matrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
        let k = separated_gain(&a, &b, Split::Slow, SEPARATED_SHIFTS[0]).unwrap();
        assert!(spectral_abscissa(&(&a - &b * &k)).unwrap().is_stable);
    }

    #[test]
    fn initial_guess_examples() {
        let p0 = initial_guess(&s(-1.0), &s(1.0), &s(1.0), &s(0.0)).unwrap();
        assert_relative_eq!(p0.matrix()[(0, 0)], 0.5, epsilon = 1e-15);
        let p0 = initial_guess(&s(1.0), &s(1.0), &s(1.0), &s(3.1)).unwrap();
        assert_relative_eq!(p0.matrix()[(0, 0)], (1.0 + 3.1 * 3.1) / 4.2, epsilon = 1e-12);
        assert_relative_eq!(p0.matrix()[(0, 0)], 2.5262, epsilon = 1e-4);
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -2.0]);
        let p0 = initial_guess(&a, &Matrix::zeros(2, 1), &Matrix::zeros(1, 2), &Matrix::zeros(1, 2))
            .unwrap();
        assert_eq!(p0.matrix(), &Matrix::zeros(2, 2));
        assert!(initial_guess(&s(1.0), &s(1.0), &s(1.0), &s(0.5)).is_err());
    }

    #[test]
    fn dichotomy_examples() {
        let b = Matrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let k = dichotomous_gain(&s(-1.0), &s(2.0), &b).unwrap();
        assert!((k[(0, 0)]).abs() <= 1e-12 && (k[(0, 1)] - 3.0).abs() <= 1e-12);
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, 2.0]));
        let closed = &a - &b * &k;
        assert!((closed - Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, -1.0]))).amax() <= 1e-12);

        let k = dichotomous_gain(&s(-1.0), &Matrix::zeros(0, 0), &Matrix::zeros(1, 2)).unwrap();
        assert_eq!(k, Matrix::zeros(2, 1));

        let b = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        assert!(matches!(
            dichotomous_gain(&s(-1.0), &s(2.0), &b),
            Err(Error::RangeConditionFailed { .. })
        ));
    }
}
