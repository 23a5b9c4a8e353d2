//! Dense matrices, the symmetric-operator cone and its partial order.
//!
//! A symmetric `n x n` matrix `P` plays the role of an operator from `X` to
//! its dual; the cone is the set of positive semidefinite `P`. Cone
//! membership is decided from the full symmetric spectrum so that singular
//! boundary points of the closed cone are accepted.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

/// Dense real matrix carrying `A`, `B`, `C`, `N`, `Q`, `K` and friends.
pub type Matrix = DMatrix<f64>;
/// Dense real vector.
pub type Vector = DVector<f64>;

const EIGEN_MAX_ITER: usize = 100_000;

/// Relative tolerances realizing the closed PSD cone numerically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeTolerances {
    /// `P` is PSD iff `lambda_min(P) >= -psd_tol * max(1, |P|_2)`.
    pub psd_tol: f64,
    /// Constructors reject `max |P_ij - P_ji| > sym_tol * max(1, |P|_F)`.
    pub sym_tol: f64,
}

impl Default for ConeTolerances {
    fn default() -> Self {
        Self {
            psd_tol: 1e-8,
            sym_tol: 1e-10,
        }
    }
}

impl ConeTolerances {
    pub fn new(psd_tol: f64, sym_tol: f64) -> Result<Self> {
        for (name, v) in [("psd_tol", psd_tol), ("sym_tol", sym_tol)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        Ok(Self { psd_tol, sym_tol })
    }
}

/// Errors with [`Error::NonFinite`] if any entry is NaN or infinite.
pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub(crate) fn ensure_square(m: &Matrix, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::dims(
            what,
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ))
    }
}

/// `max |M_ij - M_ji| / max(1, |M|_F)`.
pub fn relative_asymmetry(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / m.norm().max(1.0)
}

/// `(M + M^T) / 2` without any checks.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Symmetric `n x n` matrix, a point of `B_s(X, X*)`.
///
/// The stored matrix is exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymOperator {
    m: Matrix,
}

impl SymOperator {
    /// Symmetrizes `m`, rejecting inputs whose asymmetry exceeds `tol.sym_tol`.
    pub fn new(m: Matrix, tol: &ConeTolerances) -> Result<Self> {
        ensure_square(&m, "SymOperator")?;
        ensure_finite(&m, "SymOperator")?;
        let asym = relative_asymmetry(&m);
        if asym > tol.sym_tol {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        Ok(Self::symmetrized(&m))
    }

    /// Symmetrizes without a tolerance check. Callers own the asymmetry decision.
    pub fn symmetrized(m: &Matrix) -> Self {
        assert!(m.is_square(), "SymOperator requires a square matrix");
        Self { m: symmetrize(m) }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: Matrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: Matrix::identity(n, n),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self {
            m: Matrix::from_diagonal(&Vector::from_column_slice(d)),
        }
    }

    /// Gram operator `M^T M`, PSD by construction.
    pub fn gram(m: &Matrix) -> Self {
        Self::symmetrized(&(m.transpose() * m))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn into_matrix(self) -> Matrix {
        self.m
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self { m: &self.m * alpha }
    }

    pub fn add(&self, other: &SymOperator) -> Self {
        Self {
            m: &self.m + &other.m,
        }
    }

    pub fn sub(&self, other: &SymOperator) -> Self {
        Self {
            m: &self.m - &other.m,
        }
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        symmetric_eigenvalues(&self.m)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }

    /// Spectral norm, `max |lambda|` for a symmetric matrix.
    pub fn spectral_norm(&self) -> Result<f64> {
        let ev = self.eigenvalues()?;
        Ok(ev.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
    }
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::Eigensolver("symmetric eigendecomposition".into()))?;
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Eigen-decomposition `(ascending eigenvalues, eigenvectors as columns)`.
pub fn symmetric_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::Eigensolver("symmetric eigendecomposition".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(m.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    Ok((values, vectors))
}

/// Descending singular values.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let svd = SVD::try_new(m.clone(), false, false, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::Eigensolver("singular value decomposition".into()))?;
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

/// Moore-Penrose pseudo-inverse, singular values below `rcond * sigma_max` dropped.
pub fn pseudo_inverse(m: &Matrix, rcond: f64) -> Result<Matrix> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok(Matrix::zeros(c, r));
    }
    let svd = SVD::try_new(m.clone(), true, true, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::Eigensolver("singular value decomposition".into()))?;
    let smax = svd.singular_values.max();
    let cut = rcond * smax;
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut out = Matrix::zeros(c, r);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            out += (vt.row(k).transpose() * u.column(k).transpose()) / s;
        }
    }
    Ok(out)
}

/// `y^T P x`.
pub fn pairing(p: &SymOperator, x: &[f64], y: &[f64]) -> Result<f64> {
    let n = p.dim();
    if x.len() != n || y.len() != n {
        return Err(Error::dims(
            "pairing",
            format!("vectors of length {n}"),
            format!("{} and {}", x.len(), y.len()),
        ));
    }
    let m = p.matrix();
    let mut acc = 0.0;
    for j in 0..n {
        if x[j] == 0.0 {
            continue;
        }
        let mut col = 0.0;
        for i in 0..n {
            col += y[i] * m[(i, j)];
        }
        acc += col * x[j];
    }
    Ok(acc)
}

/// Closed-cone membership test.
pub fn is_psd(p: &SymOperator, tol: &ConeTolerances) -> Result<bool> {
    let ev = p.eigenvalues()?;
    let Some(&min) = ev.first() else {
        return Ok(true);
    };
    let norm = ev.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    Ok(min >= -tol.psd_tol * norm.max(1.0))
}

/// Outcome of comparing two symmetric operators in the cone order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeOrder {
    Equal,
    LessEq,
    GreaterEq,
    Incomparable,
}

/// Classifies `P` against `R` by cone membership of `R - P` and `P - R`.
pub fn cone_compare(p: &SymOperator, r: &SymOperator, tol: &ConeTolerances) -> Result<ConeOrder> {
    if p.dim() != r.dim() {
        return Err(Error::dims("cone_compare", p.dim(), r.dim()));
    }
    let le = is_psd(&r.sub(p), tol)?;
    let ge = is_psd(&p.sub(r), tol)?;
    Ok(match (le, ge) {
        (true, true) => ConeOrder::Equal,
        (true, false) => ConeOrder::LessEq,
        (false, true) => ConeOrder::GreaterEq,
        (false, false) => ConeOrder::Incomparable,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpNorms {
    pub frobenius: f64,
    pub spectral: f64,
}

pub fn op_norms(m: &Matrix) -> Result<OpNorms> {
    ensure_finite(m, "op_norms")?;
    Ok(OpNorms {
        frobenius: m.norm(),
        spectral: spectral_norm(m)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sym(rows: &[&[f64]]) -> SymOperator {
        let n = rows.len();
        let m = Matrix::from_fn(n, n, |i, j| rows[i][j]);
        SymOperator::new(m, &ConeTolerances::default()).unwrap()
    }

    #[test]
    fn pairing_examples() {
        let i2 = SymOperator::identity(2);
        assert_eq!(pairing(&i2, &[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(pairing(&i2, &[1.0, 1.0], &[1.0, 1.0]).unwrap(), 2.0);
        let p = sym(&[&[2.0, 1.0], &[1.0, 3.0]]);
        assert_eq!(pairing(&p, &[1.0, 0.0], &[1.0, 1.0]).unwrap(), 3.0);
        assert!(matches!(
            pairing(&p, &[1.0], &[1.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn psd_examples() {
        let tol = ConeTolerances::default();
        assert!(is_psd(&SymOperator::zeros(3), &tol).unwrap());
        assert!(!is_psd(&SymOperator::from_diagonal(&[1.0, -1.0]), &tol).unwrap());
        assert!(is_psd(&sym(&[&[1.0, 1.0], &[1.0, 1.0]]), &tol).unwrap());
    }

    #[test]
    fn boundary_of_cone_is_accepted() {
        // singular PSD with roundoff-level negative eigenvalue
        let tol = ConeTolerances::default();
        let p = SymOperator::from_diagonal(&[1.0, -1e-12]);
        assert!(is_psd(&p, &tol).unwrap());
        let q = SymOperator::from_diagonal(&[1.0, -1e-6]);
        assert!(!is_psd(&q, &tol).unwrap());
    }

    #[test]
    fn compare_examples() {
        let tol = ConeTolerances::default();
        let z = SymOperator::zeros(2);
        let i = SymOperator::identity(2);
        assert_eq!(cone_compare(&z, &i, &tol).unwrap(), ConeOrder::LessEq);
        assert_eq!(cone_compare(&i, &z, &tol).unwrap(), ConeOrder::GreaterEq);
        assert_eq!(cone_compare(&i, &i, &tol).unwrap(), ConeOrder::Equal);
        let a = SymOperator::from_diagonal(&[1.0, 0.0]);
        let b = SymOperator::from_diagonal(&[0.0, 1.0]);
        assert_eq!(cone_compare(&a, &b, &tol).unwrap(), ConeOrder::Incomparable);
        assert!(cone_compare(&a, &SymOperator::zeros(3), &tol).is_err());
    }

    #[test]
    fn norm_examples() {
        let n = op_norms(&Matrix::identity(2, 2)).unwrap();
        assert_relative_eq!(n.frobenius, 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(n.spectral, 1.0, epsilon = 1e-15);
        let d = op_norms(&Matrix::from_diagonal(&Vector::from_vec(vec![3.0, 4.0]))).unwrap();
        assert_relative_eq!(d.frobenius, 5.0, epsilon = 1e-15);
        assert_relative_eq!(d.spectral, 4.0, epsilon = 1e-14);
        let z = op_norms(&Matrix::zeros(2, 2)).unwrap();
        assert_eq!((z.frobenius, z.spectral), (0.0, 0.0));
        let mut bad = Matrix::zeros(2, 2);
        bad[(0, 1)] = f64::NAN;
        assert!(matches!(op_norms(&bad), Err(Error::NonFinite(_))));
    }

    #[test]
    fn constructor_rejects_asymmetric_input() {
        let tol = ConeTolerances::default();
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.5, 1.0]);
        assert!(matches!(
            SymOperator::new(m, &tol),
            Err(Error::NotSymmetric { .. })
        ));
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0 + 1e-14, 1.0]);
        let s = SymOperator::new(m, &tol).unwrap();
        assert_eq!(s.matrix()[(0, 1)], s.matrix()[(1, 0)]);
    }

    #[test]
    fn tolerances_validated() {
        assert!(ConeTolerances::new(0.0, 0.1).is_err());
        assert!(ConeTolerances::new(0.1, 1.0).is_err());
        assert!(ConeTolerances::new(1e-8, 1e-10).is_ok());
    }

    #[test]
    fn pseudo_inverse_of_rank_deficient() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let p = pseudo_inverse(&m, 1e-12).unwrap();
        assert_eq!(p, m);
        let b = Matrix::from_row_slice(2, 1, &[0.0, 2.0]);
        let pb = pseudo_inverse(&b, 1e-12).unwrap();
        assert_relative_eq!(pb[(0, 1)], 0.5, epsilon = 1e-15);
    }
}
