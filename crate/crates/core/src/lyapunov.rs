//! The linear Lyapunov equation `A^T P + P A = -Q`, the Lyapunov generator
//! `P -> A^T P + P A` as a Kronecker matrix, and the three-way stability
//! equivalence it supports.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{blocks_of, kron, solve_dense, Block, RealSchur};
use crate::operator::{
    ensure_finite, ensure_square, is_psd, relative_asymmetry, spectral_norm, ConeTolerances,
    Matrix, SymOperator,
};
use crate::riccati::hautus_detectable;
use crate::semigroup::spectral_abscissa;

/// Largest `n` for which the dense `n^2 x n^2` Kronecker route is allowed.
pub const KRON_MAX_DIM: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LyapunovMethod {
    /// Real Schur form and block back-substitution (Bartels-Stewart).
    #[default]
    Schur,
    /// Dense solve with the Kronecker generator.
    Kron,
}

impl std::str::FromStr for LyapunovMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "schur" => Ok(Self::Schur),
            "kron" => Ok(Self::Kron),
            other => Err(Error::InvalidParameter(format!(
                "unknown Lyapunov method {other:?} (expected schur or kron)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovProblem {
    pub a: Matrix,
    pub q: SymOperator,
}

impl LyapunovProblem {
    pub fn new(a: Matrix, q: SymOperator) -> Result<Self> {
        ensure_square(&a, "LyapunovProblem A")?;
        if a.nrows() != q.dim() {
            return Err(Error::dims("LyapunovProblem Q", a.nrows(), q.dim()));
        }
        Ok(Self { a, q })
    }

    pub fn solve(&self, method: LyapunovMethod) -> Result<SymOperator> {
        solve_lyapunov(&self.a, &self.q, method)
    }
}

/// Relative residual scale `1 + |Q|_F + |A|_F |P|_F`.
pub fn residual_scale(a: &Matrix, q: &Matrix, p: &Matrix) -> f64 {
    1.0 + q.norm() + a.norm() * p.norm()
}

/// `|A^T P + P A + Q|_F`.
pub fn lyapunov_residual(a: &Matrix, q: &Matrix, p: &Matrix) -> f64 {
    (a.transpose() * p + p * a + q).norm()
}

/// Schur factorization of `A` reused across solves with different right sides.
#[derive(Debug, Clone)]
pub struct LyapunovSolver {
    a: Matrix,
    schur: RealSchur,
    blocks: Vec<Block>,
}

impl LyapunovSolver {
    /// Factors `A`, refusing when `min |l_i + l_j| <= 1e-10 |A|_2`.
    pub fn new(a: &Matrix) -> Result<Self> {
        ensure_square(a, "solve_lyapunov A")?;
        ensure_finite(a, "solve_lyapunov A")?;
        let schur = RealSchur::new(a)?;
        check_spectrum(&schur, a)?;
        let blocks = blocks_of(&schur.t);
        Ok(Self {
            a: a.clone(),
            schur,
            blocks,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Solves `A^T X + X A = rhs` without symmetrizing.
    pub fn solve_raw(&self, rhs: &Matrix) -> Result<Matrix> {
        let n = self.dim();
        if rhs.shape() != (n, n) {
            return Err(Error::dims(
                "Lyapunov right side",
                format!("{n}x{n}"),
                format!("{}x{}", rhs.nrows(), rhs.ncols()),
            ));
        }
        let q = &self.schur.q;
        let f = q.transpose() * rhs * q;
        let x = if rhs == &rhs.transpose() {
            solve_quasi_triangular_sym(&self.schur.t, &self.blocks, &f)?
        } else {
            solve_quasi_triangular(&self.schur.t, &self.blocks, &f)?
        };
        Ok(q * x * q.transpose())
    }
}

fn check_spectrum(schur: &RealSchur, a: &Matrix) -> Result<()> {
    let ev = schur.eigenvalues();
    let mut min_sum = f64::INFINITY;
    for (i, li) in ev.iter().enumerate() {
        for lj in &ev[i..] {
            min_sum = min_sum.min((li + lj).norm());
        }
    }
    let threshold = 1e-10 * spectral_norm(a)?;
    if ev.is_empty() || min_sum > threshold {
        Ok(())
    } else {
        Err(Error::SpectrumDegenerate { min_sum, threshold })
    }
}

/// Block back-substitution for `T^T X + X T = F`, `T` upper quasi-triangular.
fn solve_quasi_triangular(t: &Matrix, blocks: &[Block], f: &Matrix) -> Result<Matrix> {
    let n = t.nrows();
    let mut x = Matrix::zeros(n, n);
    for bk in blocks {
        for bl in blocks {
            let (k0, p) = (bk.start, bk.size);
            let (l0, q) = (bl.start, bl.size);
            let mut rhs = f.view((k0, l0), (p, q)).into_owned();
            if k0 > 0 {
                // sum over i < k of T_ik^T X_il
                let t_col = t.view((0, k0), (k0, p));
                let x_col = x.view((0, l0), (k0, q));
                rhs -= t_col.transpose() * x_col;
            }
            if l0 > 0 {
                // sum over j < l of X_kj T_jl
                let x_row = x.view((k0, 0), (p, l0));
                let t_row = t.view((0, l0), (l0, q));
                rhs -= x_row * t_row;
            }
            let tkk = t.view((k0, k0), (p, p)).into_owned();
            let tll = t.view((l0, l0), (q, q)).into_owned();
            let blk = solve_block(&tkk, &tll, &rhs)?;
            x.view_mut((k0, l0), (p, q)).copy_from(&blk);
        }
    }
    Ok(x)
}

/// As [`solve_quasi_triangular`] for symmetric `F`: only blocks on and above
/// the diagonal are solved, the rest are mirrored.
fn solve_quasi_triangular_sym(t: &Matrix, blocks: &[Block], f: &Matrix) -> Result<Matrix> {
    let mut x = Matrix::zeros(t.nrows(), t.ncols());
    for (ik, bk) in blocks.iter().enumerate() {
        for bl in &blocks[ik..] {
            let (k0, p) = (bk.start, bk.size);
            let (l0, q) = (bl.start, bl.size);
            let mut rhs = f.view((k0, l0), (p, q)).into_owned();
            if k0 > 0 {
                let t_col = t.view((0, k0), (k0, p));
                let x_col = x.view((0, l0), (k0, q));
                rhs -= t_col.transpose() * x_col;
            }
            if l0 > 0 {
                let x_row = x.view((k0, 0), (p, l0));
                let t_row = t.view((0, l0), (l0, q));
                rhs -= x_row * t_row;
            }
            let tkk = t.view((k0, k0), (p, p)).into_owned();
            let tll = t.view((l0, l0), (q, q)).into_owned();
            let mut blk = solve_block(&tkk, &tll, &rhs)?;
            if k0 == l0 {
                blk = (&blk + blk.transpose()) * 0.5;
            }
            x.view_mut((k0, l0), (p, q)).copy_from(&blk);
            x.view_mut((l0, k0), (q, p)).copy_from(&blk.transpose());
        }
    }
    Ok(x)
}

/// `Tkk^T X + X Tll = R` for blocks of size at most 2.
fn solve_block(tkk: &Matrix, tll: &Matrix, r: &Matrix) -> Result<Matrix> {
    let (p, q) = (tkk.nrows(), tll.nrows());
    if p == 1 && q == 1 {
        let d = tkk[(0, 0)] + tll[(0, 0)];
        if d == 0.0 {
            return Err(Error::Singular("Lyapunov diagonal block".into()));
        }
        return Ok(Matrix::from_element(1, 1, r[(0, 0)] / d));
    }
    // (I_q kron Tkk^T + Tll^T kron I_p) vec(X) = vec(R)
    let mut k = kron(&Matrix::identity(q, q), &tkk.transpose());
    k += kron(&tll.transpose(), &Matrix::identity(p, p));
    let rhs = Matrix::from_column_slice(p * q, 1, r.as_slice());
    let sol = solve_dense(&k, &rhs, "Lyapunov diagonal block")?;
    Ok(Matrix::from_column_slice(p, q, sol.as_slice()))
}

/// Solves `A^T P + P A = -Q` and returns the unsymmetrized solution.
pub fn solve_lyapunov_raw(a: &Matrix, q: &Matrix, method: LyapunovMethod) -> Result<Matrix> {
    ensure_square(a, "solve_lyapunov A")?;
    let n = a.nrows();
    if q.shape() != (n, n) {
        return Err(Error::dims(
            "solve_lyapunov Q",
            format!("{n}x{n}"),
            format!("{}x{}", q.nrows(), q.ncols()),
        ));
    }
    ensure_finite(q, "solve_lyapunov Q")?;
    match method {
        LyapunovMethod::Schur => LyapunovSolver::new(a)?.solve_raw(&(-q)),
        LyapunovMethod::Kron => {
            if n > KRON_MAX_DIM {
                return Err(Error::TooLarge {
                    method: "Kronecker Lyapunov solve",
                    n,
                    limit: KRON_MAX_DIM,
                });
            }
            ensure_finite(a, "solve_lyapunov A")?;
            let schur = RealSchur::new(a)?;
            check_spectrum(&schur, a)?;
            let g = lyapunov_generator(a);
            let rhs = Matrix::from_column_slice(n * n, 1, (-q).as_slice());
            let v = solve_dense(&g.g, &rhs, "Kronecker Lyapunov generator")?;
            Ok(Matrix::from_column_slice(n, n, v.as_slice()))
        }
    }
}

/// Symmetric solution of `A^T P + P A = -Q`.
///
/// The returned `P` satisfies
/// `|A^T P + P A + Q|_F <= 1e-10 (1 + |Q|_F + |A|_F |P|_F)`; the check runs on
/// every call. `A` need not be stable, only `l_i + l_j != 0` is required.
pub fn solve_lyapunov(a: &Matrix, q: &SymOperator, method: LyapunovMethod) -> Result<SymOperator> {
    let raw = solve_lyapunov_raw(a, q.matrix(), method)?;
    let asym = relative_asymmetry(&raw);
    if asym > 1e-8 {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let p = SymOperator::symmetrized(&raw);
    check_residual(a, q.matrix(), p.matrix())?;
    Ok(p)
}

pub(crate) fn check_residual(a: &Matrix, q: &Matrix, p: &Matrix) -> Result<()> {
    let residual = lyapunov_residual(a, q, p);
    let bound = 1e-10 * residual_scale(a, q, p);
    if residual <= bound {
        Ok(())
    } else {
        Err(Error::ResidualTooLarge {
            context: "solve_lyapunov",
            residual,
            bound,
        })
    }
}

/// The Lyapunov generator on column-major `vec(P)`:
/// `vec(A^T P + P A) = G vec(P)` with `G = I (x) A^T + A^T (x) I`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovGeneratorMatrix {
    pub n: usize,
    pub g: Matrix,
}

impl LyapunovGeneratorMatrix {
    pub fn apply(&self, p: &Matrix) -> Matrix {
        let v = Matrix::from_column_slice(self.n * self.n, 1, p.as_slice());
        let out = &self.g * v;
        Matrix::from_column_slice(self.n, self.n, out.as_slice())
    }
}

pub fn lyapunov_generator(a: &Matrix) -> LyapunovGeneratorMatrix {
    assert!(a.is_square(), "lyapunov_generator requires a square matrix");
    let n = a.nrows();
    let at = a.transpose();
    let eye = Matrix::identity(n, n);
    LyapunovGeneratorMatrix {
        n,
        g: kron(&eye, &at) + kron(&at, &eye),
    }
}

/// Outcome of the three-way stability equivalence test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WonhamReport {
    /// `(C, A)` passed the Hautus detectability test.
    pub hypothesis_met: bool,
    /// Lyapunov equation with `Q = C^T C` has a PSD solution; `None` when the
    /// spectrum makes the equation undecidable.
    pub cond_i: Option<bool>,
    /// `A` is exponentially stable.
    pub cond_ii: bool,
    /// The generator is invertible and `-G^{-1}` is cone preserving on samples.
    pub cond_iii: bool,
    /// All decided conditions agree.
    pub consistent: bool,
}

pub const WONHAM_SAMPLES: usize = 24;
const WONHAM_SEED: u64 = 0x0057_0a4a;

pub fn wonham_equivalence(a: &Matrix, c: &Matrix, tol: &ConeTolerances) -> Result<WonhamReport> {
    wonham_equivalence_with(a, c, tol, WONHAM_SAMPLES, WONHAM_SEED)
}

pub fn wonham_equivalence_with(
    a: &Matrix,
    c: &Matrix,
    tol: &ConeTolerances,
    samples: usize,
    seed: u64,
) -> Result<WonhamReport> {
    ensure_square(a, "wonham_equivalence A")?;
    let n = a.nrows();
    if c.ncols() != n {
        return Err(Error::dims("wonham_equivalence C columns", n, c.ncols()));
    }
    let hypothesis_met = hautus_detectable(c, a)?;

    let q = SymOperator::gram(c);
    let cond_i = match solve_lyapunov(a, &q, LyapunovMethod::Schur) {
        Ok(p) => Some(is_psd(&p, tol)?),
        Err(Error::SpectrumDegenerate { .. }) => None,
        Err(e) => return Err(e),
    };

    let cond_ii = spectral_abscissa(a)?.is_stable;

    let cond_iii = inverse_is_positive(a, tol, samples, seed)?;

    let consistent = match cond_i {
        Some(i) => i == cond_ii && cond_ii == cond_iii,
        None => cond_ii == cond_iii,
    };
    Ok(WonhamReport {
        hypothesis_met,
        cond_i,
        cond_ii,
        cond_iii,
        consistent,
    })
}

/// True when `G` is invertible and `-G^{-1}` maps every sampled PSD matrix
/// (full-rank Gram matrices and rank-one projectors) into the cone.
pub fn inverse_is_positive(
    a: &Matrix,
    tol: &ConeTolerances,
    samples: usize,
    seed: u64,
) -> Result<bool> {
    let n = a.nrows();
    if n > KRON_MAX_DIM {
        return Err(Error::TooLarge {
            method: "Kronecker generator inverse",
            n,
            limit: KRON_MAX_DIM,
        });
    }
    let g = lyapunov_generator(a);
    let lu = g.g.clone().lu();
    let udiag = lu.u().diagonal();
    let umax = udiag.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let umin = udiag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if n > 0 && !(umin > 1e-12 * umax) {
        return Ok(false);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..samples {
        let rank = if k % 3 == 2 { 1 } else { n };
        let m = Matrix::from_fn(n, rank, |_, _| StandardNormal.sample(&mut rng));
        let sample = &m * m.transpose();
        let rhs = Matrix::from_column_slice(n * n, 1, sample.as_slice());
        let Some(v) = lu.solve(&rhs) else {
            return Ok(false);
        };
        let image = -Matrix::from_column_slice(n, n, v.as_slice());
        if !is_psd(&SymOperator::symmetrized(&image), tol)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Vector;
    use approx::assert_relative_eq;

    fn rand_matrix(r: usize, c: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn scalar_and_diagonal_examples() {
        let a = Matrix::from_element(1, 1, -1.0);
        let q = SymOperator::from_diagonal(&[2.0]);
        for m in [LyapunovMethod::Schur, LyapunovMethod::Kron] {
            assert_relative_eq!(solve_lyapunov(&a, &q, m).unwrap().matrix()[(0, 0)], 1.0);
        }
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, -2.0]));
        let p = solve_lyapunov(&a, &SymOperator::identity(2), LyapunovMethod::Schur).unwrap();
        assert_relative_eq!(p.matrix()[(0, 0)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(p.matrix()[(1, 1)], 0.25, epsilon = 1e-15);
        assert!(p.matrix()[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn companion_matrix_against_kron_oracle() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
        let q = SymOperator::identity(2);
        let ps = solve_lyapunov(&a, &q, LyapunovMethod::Schur).unwrap();
        let pk = solve_lyapunov(&a, &q, LyapunovMethod::Kron).unwrap();
        assert!((ps.matrix() - pk.matrix()).norm() <= 1e-8 * pk.matrix().norm());
        // hand solution of the 2x2 system: P = [[5/4, 1/4], [1/4, 1/4]]
        let exact = Matrix::from_row_slice(2, 2, &[1.25, 0.25, 0.25, 0.25]);
        assert!((pk.matrix() - exact).norm() < 1e-14);
    }

    #[test]
    fn degenerate_spectrum_is_refused() {
        let rot = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let q = SymOperator::identity(2);
        for m in [LyapunovMethod::Schur, LyapunovMethod::Kron] {
            assert!(matches!(
                solve_lyapunov(&rot, &q, m),
                Err(Error::SpectrumDegenerate { .. })
            ));
        }
        let mixed = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(
            solve_lyapunov(&mixed, &q, LyapunovMethod::Schur),
            Err(Error::SpectrumDegenerate { .. })
        ));
    }

    #[test]
    fn unstable_matrices_are_solved() {
        let a = Matrix::from_element(1, 1, 1.0);
        let p = solve_lyapunov(&a, &SymOperator::identity(1), LyapunovMethod::Schur).unwrap();
        assert_relative_eq!(p.matrix()[(0, 0)], -0.5);
    }

    #[test]
    fn complex_blocks_match_kron() {
        for seed in 0..10 {
            let n = 2 + seed as usize;
            let a = rand_matrix(n, n, seed) - Matrix::identity(n, n) * 3.0;
            let m = rand_matrix(n, n, seed + 50);
            let q = SymOperator::symmetrized(&(&m * m.transpose()));
            let ps = solve_lyapunov(&a, &q, LyapunovMethod::Schur).unwrap();
            let pk = solve_lyapunov(&a, &q, LyapunovMethod::Kron).unwrap();
            let d = (ps.matrix() - pk.matrix()).norm();
            assert!(d <= 1e-8 * pk.matrix().norm(), "n={n}: {d}");
        }
    }

    #[test]
    fn generator_examples() {
        assert_eq!(lyapunov_generator(&Matrix::zeros(3, 3)).g, Matrix::zeros(9, 9));
        let g = lyapunov_generator(&Matrix::from_element(1, 1, 1.7));
        assert_relative_eq!(g.g[(0, 0)], 3.4);
        let a = rand_matrix(4, 4, 9);
        let s = rand_matrix(4, 4, 10);
        let p = &s + s.transpose();
        let direct = a.transpose() * &p + &p * &a;
        let via_g = lyapunov_generator(&a).apply(&p);
        assert!((direct - via_g).norm() <= 1e-12 * (1.0 + p.norm() * a.norm()));
    }

    #[test]
    fn generator_is_additive() {
        let a = rand_matrix(3, 3, 1);
        let b = rand_matrix(3, 3, 2);
        let lhs = lyapunov_generator(&(&a + &b)).g;
        let rhs = lyapunov_generator(&a).g + lyapunov_generator(&b).g;
        assert!((lhs - rhs).amax() <= 1e-15 * 8.0);
    }

    #[test]
    fn wonham_examples() {
        let tol = ConeTolerances::default();
        let r = wonham_equivalence(&(-Matrix::identity(2, 2)), &Matrix::identity(2, 2), &tol)
            .unwrap();
        assert!(r.hypothesis_met && r.cond_i == Some(true) && r.cond_ii && r.cond_iii);
        assert!(r.consistent);

        let one = Matrix::from_element(1, 1, 1.0);
        let r = wonham_equivalence(&one, &one, &tol).unwrap();
        assert!(r.hypothesis_met);
        assert_eq!((r.cond_i, r.cond_ii, r.cond_iii), (Some(false), false, false));
        assert!(r.consistent);

        let a = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, -3.0]));
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let r = wonham_equivalence(&a, &c, &tol).unwrap();
        assert!(r.hypothesis_met && r.cond_i == Some(true) && r.cond_ii && r.cond_iii);
    }

    #[test]
    fn wonham_flags_unmet_hypothesis() {
        // unobserved unstable mode: P = 0 is PSD although A is unstable
        let tol = ConeTolerances::default();
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, -1.0]));
        let c = Matrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let r = wonham_equivalence(&a, &c, &tol).unwrap();
        assert!(!r.hypothesis_met);
        assert_eq!(r.cond_i, Some(true));
        assert!(!r.cond_ii);
    }
}
