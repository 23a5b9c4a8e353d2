//! Real Schur form with block bookkeeping and eigenvalue reordering, plus a
//! few small dense helpers shared by the solvers.

use nalgebra::Schur;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::operator::{ensure_finite, ensure_square, Matrix};

/// Francis sweeps allowed per unit of dimension.
const SCHUR_ITER_PER_DIM: usize = 100;

/// `A = Q T Q^T` with `T` upper quasi-triangular (1x1 and 2x2 diagonal blocks,
/// every 2x2 block carrying a complex-conjugate eigenvalue pair).
#[derive(Debug, Clone)]
pub struct RealSchur {
    pub q: Matrix,
    pub t: Matrix,
}

/// A diagonal block of a quasi-triangular matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub start: usize,
    pub size: usize,
}

impl RealSchur {
    pub fn new(a: &Matrix) -> Result<Self> {
        ensure_square(a, "real Schur")?;
        ensure_finite(a, "real Schur")?;
        let n = a.nrows();
        if n == 0 {
            return Ok(Self {
                q: Matrix::zeros(0, 0),
                t: Matrix::zeros(0, 0),
            });
        }
        if let Some(s) = Self::attempt(a, &[1.0, 4.0]) {
            return Ok(s);
        }
        // deflation is tested against neighbouring diagonal entries, which
        // stalls on small repeated eigenvalues of a large matrix; the shift
        // makes the test normwise
        let sigma = a.norm() + 1.0;
        if let Some(mut s) = Self::attempt(&(a + Matrix::identity(n, n) * sigma), &[1.0, 4.0, 16.0, 64.0, 256.0]) {
            for i in 0..n {
                s.t[(i, i)] -= sigma;
            }
            s.standardize_all();
            return Ok(s);
        }
        // Francis iteration without exceptional shifts can stall on highly
        // structured input; an orthogonal change of basis breaks the symmetry.
        for seed in 0..3u64 {
            let z = random_orthogonal(n, 0x5eed_0000 + seed);
            let b = z.transpose() * a * &z;
            if let Some(s) = Self::attempt(&b, &[1.0, 4.0]) {
                return Ok(Self { q: z * s.q, t: s.t });
            }
        }
        Err(Error::Eigensolver(format!("real Schur form of a {n}x{n} matrix")))
    }

    /// Tries each deflation tolerance, in units of the unit roundoff.
    fn attempt(a: &Matrix, ladder: &[f64]) -> Option<Self> {
        let max_iter = SCHUR_ITER_PER_DIM * a.nrows().max(10);
        let (q, mut t) = ladder
            .iter()
            .find_map(|k| Schur::try_new(a.clone(), k * f64::EPSILON, max_iter))?
            .unpack();
        if !q.iter().chain(t.iter()).all(|v| v.is_finite()) {
            return None;
        }
        let n = t.nrows();
        for j in 0..n {
            for i in (j + 2)..n {
                t[(i, j)] = 0.0;
            }
        }
        // two consecutive nonzero subdiagonal entries mean an unreduced block
        for i in 0..n.saturating_sub(2) {
            if t[(i + 1, i)] != 0.0 && t[(i + 2, i + 1)] != 0.0 {
                return None;
            }
        }
        let mut s = Self { q, t };
        s.standardize_all();
        Some(s)
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn blocks(&self) -> Vec<Block> {
        blocks_of(&self.t)
    }

    /// Eigenvalues in diagonal order.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.dim());
        for b in self.blocks() {
            out.extend(block_eigenvalues(&self.t, b));
        }
        out
    }

    /// Reorders the form so that every block whose eigenvalues satisfy
    /// `select` comes first. Returns the number of leading selected columns.
    pub fn reorder(&mut self, select: impl Fn(Complex64) -> bool) -> Result<usize> {
        let mut blocks = self.blocks();
        let selected: Vec<bool> = blocks
            .iter()
            .map(|&b| select(block_eigenvalues(&self.t, b)[0]))
            .collect();
        let mut flags = selected;
        // insertion sort by adjacent swaps, keeping the relative order
        let mut placed = 0;
        for k in 0..blocks.len() {
            if !flags[k] {
                continue;
            }
            let mut pos = k;
            while pos > placed {
                let upper = blocks[pos - 1];
                let lower = blocks[pos];
                self.swap_adjacent(upper.start, upper.size, lower.size)?;
                blocks[pos - 1] = Block {
                    start: upper.start,
                    size: lower.size,
                };
                blocks[pos] = Block {
                    start: upper.start + lower.size,
                    size: upper.size,
                };
                flags.swap(pos - 1, pos);
                pos -= 1;
            }
            placed += 1;
        }
        Ok(blocks[..placed].iter().map(|b| b.size).sum())
    }

    /// Swaps the adjacent diagonal blocks `T[j..j+p]` and `T[j+p..j+p+q]`.
    fn swap_adjacent(&mut self, j: usize, p: usize, q: usize) -> Result<()> {
        let k = p + q;
        let a11 = self.t.view((j, j), (p, p)).into_owned();
        let a12 = self.t.view((j, j + p), (p, q)).into_owned();
        let a22 = self.t.view((j + p, j + p), (q, q)).into_owned();
        // A11 X - X A22 = -A12, so [X; I] spans the A22-invariant subspace
        let x = solve_small_sylvester(&a11, &a22, &(-a12))?;
        let mut basis = Matrix::zeros(k, q);
        basis.view_mut((0, 0), (p, q)).copy_from(&x);
        for i in 0..q {
            basis[(p + i, i)] = 1.0;
        }
        let qs = householder_full_q(&basis);

        let n = self.dim();
        let rows = self.t.view((j, 0), (k, n)).into_owned();
        self.t.view_mut((j, 0), (k, n)).copy_from(&(qs.transpose() * rows));
        let cols = self.t.view((0, j), (n, k)).into_owned();
        self.t.view_mut((0, j), (n, k)).copy_from(&(cols * &qs));
        let qcols = self.q.view((0, j), (n, k)).into_owned();
        self.q.view_mut((0, j), (n, k)).copy_from(&(qcols * &qs));

        let scale = self.t.view((j, j), (k, k)).norm().max(f64::MIN_POSITIVE);
        let leak = self.t.view((j + q, j), (p, q)).norm();
        if leak > 1e-8 * scale {
            return Err(Error::Eigensolver(format!(
                "Schur block swap lost invariance (relative leak {:.3e})",
                leak / scale
            )));
        }
        self.t.view_mut((j + q, j), (p, q)).fill(0.0);
        for i in (j + 2).min(n)..n {
            for c in j..(j + k).min(i - 1) {
                self.t[(i, c)] = 0.0;
            }
        }
        self.standardize_block(j, q);
        self.standardize_block(j + q, p);
        Ok(())
    }

    fn standardize_all(&mut self) {
        for b in self.blocks() {
            self.standardize_block(b.start, b.size);
        }
    }

    /// Triangularizes a 2x2 block whose eigenvalues turned out real.
    fn standardize_block(&mut self, j: usize, size: usize) {
        if size != 2 {
            return;
        }
        let (a, b, c, d) = (
            self.t[(j, j)],
            self.t[(j, j + 1)],
            self.t[(j + 1, j)],
            self.t[(j + 1, j + 1)],
        );
        if c == 0.0 {
            return;
        }
        let half = 0.5 * (a - d);
        let disc = half * half + b * c;
        if disc < 0.0 {
            return;
        }
        let root = disc.sqrt();
        let lambda = if half >= 0.0 {
            0.5 * (a + d) + root
        } else {
            0.5 * (a + d) - root
        };
        // eigenvector (lambda - d, c) of the block
        let (vx, vy) = (lambda - d, c);
        let r = vx.hypot(vy);
        if r == 0.0 {
            return;
        }
        let (cs, sn) = (vx / r, vy / r);
        let n = self.dim();
        // G = [[cs, -sn], [sn, cs]], T <- G^T T G, Q <- Q G
        for col in 0..n {
            let (x0, x1) = (self.t[(j, col)], self.t[(j + 1, col)]);
            self.t[(j, col)] = cs * x0 + sn * x1;
            self.t[(j + 1, col)] = -sn * x0 + cs * x1;
        }
        for row in 0..n {
            let (x0, x1) = (self.t[(row, j)], self.t[(row, j + 1)]);
            self.t[(row, j)] = cs * x0 + sn * x1;
            self.t[(row, j + 1)] = -sn * x0 + cs * x1;
            let (y0, y1) = (self.q[(row, j)], self.q[(row, j + 1)]);
            self.q[(row, j)] = cs * y0 + sn * y1;
            self.q[(row, j + 1)] = -sn * y0 + cs * y1;
        }
        self.t[(j + 1, j)] = 0.0;
    }
}

pub fn blocks_of(t: &Matrix) -> Vec<Block> {
    let n = t.nrows();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            out.push(Block { start: i, size: 2 });
            i += 2;
        } else {
            out.push(Block { start: i, size: 1 });
            i += 1;
        }
    }
    out
}

pub fn block_eigenvalues(t: &Matrix, b: Block) -> Vec<Complex64> {
    let j = b.start;
    if b.size == 1 {
        return vec![Complex64::new(t[(j, j)], 0.0)];
    }
    let (a, bb, c, d) = (t[(j, j)], t[(j, j + 1)], t[(j + 1, j)], t[(j + 1, j + 1)]);
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let disc = half * half + bb * c;
    if disc >= 0.0 {
        let r = disc.sqrt();
        vec![Complex64::new(mean + r, 0.0), Complex64::new(mean - r, 0.0)]
    } else {
        let im = (-disc).sqrt();
        vec![Complex64::new(mean, im), Complex64::new(mean, -im)]
    }
}

/// All eigenvalues of a general real square matrix.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<Complex64>> {
    Ok(RealSchur::new(a)?.eigenvalues())
}

/// Solves `A11 X - X A22 = C` for blocks of size at most 2.
fn solve_small_sylvester(a11: &Matrix, a22: &Matrix, c: &Matrix) -> Result<Matrix> {
    let (p, q) = (a11.nrows(), a22.nrows());
    // vec(A11 X - X A22) = (I_q kron A11 - A22^T kron I_p) vec(X)
    let mut k = Matrix::zeros(p * q, p * q);
    for col in 0..q {
        for row in 0..q {
            for i in 0..p {
                for jj in 0..p {
                    if row == col {
                        k[(row * p + i, col * p + jj)] += a11[(i, jj)];
                    }
                }
                k[(row * p + i, col * p + i)] -= a22[(col, row)];
            }
        }
    }
    let rhs = Matrix::from_column_slice(p * q, 1, c.as_slice());
    let sol = solve_dense(&k, &rhs, "Schur block swap")?;
    Ok(Matrix::from_column_slice(p, q, sol.as_slice()))
}

/// Full orthogonal factor of a Householder QR of a tall matrix.
fn householder_full_q(m: &Matrix) -> Matrix {
    let (rows, cols) = m.shape();
    let mut r = m.clone();
    let mut q = Matrix::identity(rows, rows);
    for k in 0..cols.min(rows.saturating_sub(1)) {
        let x = r.view((k, k), (rows - k, 1)).into_owned();
        let alpha = x.norm();
        if alpha == 0.0 {
            continue;
        }
        let mut v = x;
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vnorm2 = v.norm_squared();
        if vnorm2 == 0.0 {
            continue;
        }
        // H = I - 2 v v^T / (v^T v) on rows k..
        let sub = r.view((k, 0), (rows - k, cols)).into_owned();
        let upd = &v * (v.transpose() * &sub) * (2.0 / vnorm2);
        r.view_mut((k, 0), (rows - k, cols)).copy_from(&(sub - upd));
        let qsub = q.view((0, k), (rows, rows - k)).into_owned();
        let qupd = (&qsub * &v) * v.transpose() * (2.0 / vnorm2);
        q.view_mut((0, k), (rows, rows - k)).copy_from(&(qsub - qupd));
    }
    q
}

/// LU solve with partial pivoting; errors on (numerically) singular input.
pub fn solve_dense(a: &Matrix, b: &Matrix, context: &str) -> Result<Matrix> {
    let lu = a.clone().lu();
    let u = lu.u();
    let diag_max = u.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let diag_min = u.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if a.nrows() > 0 && !(diag_min > f64::EPSILON * diag_max) {
        return Err(Error::Singular(context.to_string()));
    }
    let x = lu
        .solve(b)
        .ok_or_else(|| Error::Singular(context.to_string()))?;
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Singular(context.to_string()));
    }
    Ok(x)
}

/// Haar-ish random orthogonal matrix from a seeded Gaussian QR.
pub fn random_orthogonal(n: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Matrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    householder_full_q(&g)
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s != 0.0 {
                out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * s));
            }
        }
    }
    out
}

/// Dimension of the space of symmetric `n x n` matrices.
pub fn sym_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Upper-triangle coordinates of a symmetric matrix (column by column).
pub fn sym_to_coords(m: &Matrix) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(sym_dim(n));
    for j in 0..n {
        for i in 0..=j {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn coords_to_sym(n: usize, c: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            m[(i, j)] = c[k];
            m[(j, i)] = c[k];
            k += 1;
        }
    }
    m
}
