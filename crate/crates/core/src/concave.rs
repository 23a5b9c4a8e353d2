//! Newton's method for `F(x) = A x + Phi(x) = 0` on symmetric matrices,
//! ordered by the PSD cone, with `Phi` order concave.
//!
//! With `L(x) = Phi(x) - Phi'(x) x` and
//! `Psi(x, y) = Phi(x) - Phi(y) + Phi'(x)(y - x)`, a step solves
//! `F'(x) y = -L(x)`; concavity makes `Psi >= 0`, and then
//! `F(y) = -Psi(x, y) <= 0` and the iterates decrease from the first step on.

use serde::Serialize;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::linalg::{coords_to_sym, eigenvalues, solve_dense, sym_dim, sym_to_coords};
use crate::lyapunov::{solve_lyapunov_raw, LyapunovMethod};
use crate::operator::{ensure_square, is_psd, ConeTolerances, Matrix, SymOperator};
use crate::riccati::{IterationTrace, StateSpaceSystem, TraceRow};
use crate::semigroup::{spectral_abscissa, StabilityReport};

/// The pair `(A, Phi)` of a concave operator equation.
///
/// Implementations must be free of side effects. Only `linear`, `phi` and
/// `dphi` are required; the linearized solve and its stability test default
/// to dense assembly on the `n(n+1)/2` symmetric coordinates.
pub trait ConcaveMap {
    /// `n` for `n x n` symmetric matrices.
    fn dim(&self) -> usize;

    /// The linear part `A x`.
    fn linear(&self, x: &SymOperator) -> SymOperator;

    fn phi(&self, x: &SymOperator) -> SymOperator;

    /// `Phi'(x) y`.
    fn dphi(&self, x: &SymOperator, y: &SymOperator) -> SymOperator;

    /// `L(x) = Phi(x) - Phi'(x) x`.
    fn l_map(&self, x: &SymOperator) -> SymOperator {
        self.phi(x).sub(&self.dphi(x, x))
    }

    /// `F'(x) y = A y + Phi'(x) y`.
    fn linearized(&self, x: &SymOperator, y: &SymOperator) -> SymOperator {
        self.linear(y).add(&self.dphi(x, y))
    }

    /// Solves `F'(x) y = rhs`.
    fn solve_linearized(&self, x: &SymOperator, rhs: &SymOperator) -> Result<SymOperator> {
        let g = assemble_linearization(self, x);
        let b = Matrix::from_column_slice(g.nrows(), 1, &sym_to_coords(rhs.matrix()));
        let c = solve_dense(&g, &b, "linearized concave map")?;
        Ok(SymOperator::symmetrized(&coords_to_sym(self.dim(), c.as_slice())))
    }

    /// Exponential stability of the semigroup generated by `F'(x)`.
    fn linearization_stability(&self, x: &SymOperator) -> Result<StabilityReport> {
        let g = assemble_linearization(self, x);
        spectral_abscissa(&g)
    }

    /// Scale `s(x)` in the stopping rule `|F(x)|_F <= rel_tol s(x)`.
    fn residual_scale(&self, x: &SymOperator) -> f64 {
        let zero = SymOperator::zeros(self.dim());
        1.0 + self.phi(&zero).matrix().norm() + self.linear(x).matrix().norm()
    }
}

/// `F'(x)` as a matrix on upper-triangle coordinates.
pub fn assemble_linearization<M: ConcaveMap + ?Sized>(map: &M, x: &SymOperator) -> Matrix {
    let n = map.dim();
    let d = sym_dim(n);
    let mut g = Matrix::zeros(d, d);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            let mut e = Matrix::zeros(n, n);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            let image = map.linearized(x, &SymOperator::symmetrized(&e));
            for (r, v) in sym_to_coords(image.matrix()).into_iter().enumerate() {
                g[(r, k)] = v;
            }
            k += 1;
        }
    }
    g
}

/// `F(x) = A x + Phi(x)`.
pub fn evaluate<M: ConcaveMap + ?Sized>(map: &M, x: &SymOperator) -> SymOperator {
    map.linear(x).add(&map.phi(x))
}

/// `Psi(x, y) = Phi(x) - Phi(y) + Phi'(x)(y - x)`.
pub fn psi<M: ConcaveMap + ?Sized>(map: &M, x: &SymOperator, y: &SymOperator) -> SymOperator {
    map.phi(x)
        .sub(&map.phi(y))
        .add(&map.dphi(x, &y.sub(x)))
}

/// Riccati map: `A P = A^T P + P A`, `Phi(P) = Q - P N P`, so
/// `F'(P) R = (A - NP)^T R + R (A - NP)` and `L(P) = P N P + Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiMap {
    a: Matrix,
    n: Matrix,
    q: Matrix,
    method: LyapunovMethod,
    fixed_scale: Option<f64>,
}

impl RiccatiMap {
    pub fn new(a: Matrix, n: &SymOperator, q: &SymOperator, method: LyapunovMethod) -> Result<Self> {
        ensure_square(&a, "RiccatiMap A")?;
        let dim = a.nrows();
        for (name, m) in [("N", n), ("Q", q)] {
            if m.dim() != dim {
                return Err(Error::dims(&format!("RiccatiMap {name}"), dim, m.dim()));
            }
        }
        Ok(Self {
            a,
            n: n.matrix().clone(),
            q: q.matrix().clone(),
            method,
            fixed_scale: None,
        })
    }

    pub fn from_system(sys: &StateSpaceSystem, method: LyapunovMethod) -> Result<Self> {
        Self::new(sys.a().clone(), &sys.n_op(), &sys.q_op(), method)
    }

    /// Stops on the absolute residual `|F(x)|_F <= rel_tol`.
    pub fn with_absolute_stop(mut self) -> Self {
        self.fixed_scale = Some(1.0);
        self
    }

    fn closed_loop(&self, x: &SymOperator) -> Matrix {
        &self.a - &self.n * x.matrix()
    }
}

impl ConcaveMap for RiccatiMap {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn linear(&self, x: &SymOperator) -> SymOperator {
        SymOperator::symmetrized(&(self.a.transpose() * x.matrix() + x.matrix() * &self.a))
    }

    fn phi(&self, x: &SymOperator) -> SymOperator {
        SymOperator::symmetrized(&(&self.q - x.matrix() * &self.n * x.matrix()))
    }

    fn dphi(&self, x: &SymOperator, y: &SymOperator) -> SymOperator {
        let xny = x.matrix() * &self.n * y.matrix();
        SymOperator::symmetrized(&(-(&xny + xny.transpose())))
    }

    fn l_map(&self, x: &SymOperator) -> SymOperator {
        let xnx = SymOperator::symmetrized(&(x.matrix() * &self.n * x.matrix()));
        SymOperator::symmetrized(&(&self.q + xnx.matrix()))
    }

    fn solve_linearized(&self, x: &SymOperator, rhs: &SymOperator) -> Result<SymOperator> {
        let raw = solve_lyapunov_raw(&self.closed_loop(x), &(-rhs.matrix()), self.method)?;
        Ok(SymOperator::symmetrized(&raw))
    }

    /// The Lyapunov operator of `A - NX` has spectrum `l_i + l_j`, so its
    /// abscissa is twice that of the closed loop.
    fn linearization_stability(&self, x: &SymOperator) -> Result<StabilityReport> {
        let r = spectral_abscissa(&self.closed_loop(x))?;
        Ok(StabilityReport {
            abscissa: 2.0 * r.abscissa,
            is_stable: r.is_stable,
            margin: 2.0 * r.margin,
        })
    }

    fn residual_scale(&self, x: &SymOperator) -> f64 {
        self.fixed_scale
            .unwrap_or_else(|| 1.0 + self.q.norm() + self.a.norm() * x.matrix().norm())
    }
}

/// The problem `F(x + theta) = 0` solved for `x >= 0`, where `theta >= 0`
/// satisfies `F(theta) >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Shifted<M> {
    inner: M,
    theta: SymOperator,
}

impl<M: ConcaveMap> Shifted<M> {
    pub fn theta(&self) -> &SymOperator {
        &self.theta
    }
}

impl<M: ConcaveMap> ConcaveMap for Shifted<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn linear(&self, x: &SymOperator) -> SymOperator {
        self.inner.linear(x)
    }

    fn phi(&self, x: &SymOperator) -> SymOperator {
        self.inner
            .linear(&self.theta)
            .add(&self.inner.phi(&x.add(&self.theta)))
    }

    fn dphi(&self, x: &SymOperator, y: &SymOperator) -> SymOperator {
        self.inner.dphi(&x.add(&self.theta), y)
    }

    fn solve_linearized(&self, x: &SymOperator, rhs: &SymOperator) -> Result<SymOperator> {
        self.inner.solve_linearized(&x.add(&self.theta), rhs)
    }

    fn linearization_stability(&self, x: &SymOperator) -> Result<StabilityReport> {
        self.inner.linearization_stability(&x.add(&self.theta))
    }

    fn residual_scale(&self, x: &SymOperator) -> f64 {
        self.inner.residual_scale(&x.add(&self.theta))
    }
}

/// A concave map together with the cone tolerances used to verify it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcaveProblem<M> {
    pub map: M,
    pub cone_tol: ConeTolerances,
}

impl<M: ConcaveMap> ConcaveProblem<M> {
    /// Requires `Phi(0) >= 0`.
    pub fn new(map: M, cone_tol: ConeTolerances) -> Result<Self> {
        let phi0 = map.phi(&SymOperator::zeros(map.dim()));
        if !is_psd(&phi0, &cone_tol)? {
            return Err(Error::ConeViolation {
                min_eigenvalue: phi0.min_eigenvalue()?,
            });
        }
        Ok(Self { map, cone_tol })
    }

    /// Relaxed hypothesis: `theta >= 0` with `F(theta) >= 0` replaces
    /// `Phi(0) >= 0`. Solutions of the shifted problem are shifted back by
    /// [`ConcaveProblem::unshift`].
    pub fn shifted(map: M, theta: SymOperator, cone_tol: ConeTolerances) -> Result<ConcaveProblem<Shifted<M>>> {
        if theta.dim() != map.dim() {
            return Err(Error::dims("shift theta", map.dim(), theta.dim()));
        }
        for candidate in [&theta, &evaluate(&map, &theta)] {
            if !is_psd(candidate, &cone_tol)? {
                return Err(Error::ConeViolation {
                    min_eigenvalue: candidate.min_eigenvalue()?,
                });
            }
        }
        ConcaveProblem::new(Shifted { inner: map, theta }, cone_tol)
    }

    /// Smallest eigenvalue of `Psi(x, y)` over the given pairs; concavity
    /// requires it to be nonnegative.
    pub fn concavity_witness(&self, pairs: &[(SymOperator, SymOperator)]) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for (x, y) in pairs {
            worst = worst.min(psi(&self.map, x, y).min_eigenvalue()?);
        }
        Ok(worst)
    }
}

impl<M: ConcaveMap> ConcaveProblem<Shifted<M>> {
    pub fn unshift(&self, x: &SymOperator) -> SymOperator {
        x.add(&self.map.theta)
    }
}

/// Checks made on one step `x -> y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StepReport {
    /// Abscissa of `F'(x)`.
    pub abscissa: f64,
    /// `lambda_min(y)`.
    pub min_eigenvalue: f64,
    /// `|F(y) + Psi(x, y)|_F`, relative to the size of the terms involved.
    pub identity_gap: f64,
    /// `F(y) <= 0` within the cone tolerance.
    pub supersolution: bool,
    /// When `F(x) <= 0`: whether `y <= x`.
    pub descent: Option<bool>,
}

/// Tolerance for the step identity `F(y) = -Psi(x, y)`.
pub const IDENTITY_TOL: f64 = 1e-9;

impl StepReport {
    pub fn passed(&self) -> bool {
        self.identity_gap <= IDENTITY_TOL && self.supersolution && self.descent != Some(false)
    }
}

/// One Newton step `F'(x) y = -L(x)`.
pub fn newton_step<M: ConcaveMap>(
    prob: &ConcaveProblem<M>,
    x: &SymOperator,
) -> Result<(SymOperator, StepReport)> {
    let map = &prob.map;
    if x.dim() != map.dim() {
        return Err(Error::dims("newton_step x", map.dim(), x.dim()));
    }
    let stability = map.linearization_stability(x)?;
    if !stability.is_stable {
        return Err(Error::LinearizationUnstable {
            abscissa: stability.abscissa,
        });
    }
    let l = map.l_map(x);
    let y = map.solve_linearized(x, &l.scale(-1.0))?;
    let min_eigenvalue = y.min_eigenvalue()?;
    if !is_psd(&y, &prob.cone_tol)? {
        return Err(Error::ConeViolation { min_eigenvalue });
    }
    let fy = evaluate(map, &y);
    let ps = psi(map, x, &y);
    let scale = 1.0
        + l.matrix().norm()
        + map.linear(&y).matrix().norm()
        + map.dphi(x, &y).matrix().norm()
        + ps.matrix().norm();
    let identity_gap = fy.add(&ps).matrix().norm() / scale;
    let supersolution = is_psd(&fy.scale(-1.0), &prob.cone_tol)?;
    let descent = if is_psd(&evaluate(map, x).scale(-1.0), &prob.cone_tol)? {
        Some(is_psd(&x.sub(&y), &prob.cone_tol)?)
    } else {
        None
    };
    Ok((
        y,
        StepReport {
            abscissa: stability.abscissa,
            min_eigenvalue,
            identity_gap,
            supersolution,
            descent,
        },
    ))
}

#[derive(Debug, Clone)]
pub struct ConcaveSolution {
    pub x: SymOperator,
    pub residual: f64,
    pub iterations: usize,
    /// `abscissa` column holds the abscissa of `F'(x_n)`.
    pub trace: IterationTrace,
    pub steps: Vec<StepReport>,
}

/// Newton iteration from `x0 >= 0` with `F'(x0)` stable.
///
/// Stops on `|F(x_n)|_F <= rel_tol s(x_n)` or on a relative step below
/// `step_tol`; iterates must decrease from `n = 1` on.
pub fn newton_solve<M: ConcaveMap>(
    prob: &ConcaveProblem<M>,
    x0: &SymOperator,
    cfg: &SolverConfig,
) -> Result<ConcaveSolution> {
    cfg.validate()?;
    let map = &prob.map;
    if x0.dim() != map.dim() {
        return Err(Error::dims("newton_solve x0", map.dim(), x0.dim()));
    }
    if !is_psd(x0, &prob.cone_tol)? {
        return Err(Error::ConeViolation {
            min_eigenvalue: x0.min_eigenvalue()?,
        });
    }
    let mut trace = IterationTrace::default();
    let mut steps = Vec::new();
    let mut x = x0.clone();
    let mut x1_norm: Option<f64> = None;
    loop {
        let step = trace.rows.len();
        let residual = evaluate(map, &x).matrix().norm();
        let converged = residual <= cfg.rel_tol * map.residual_scale(&x);
        let mut row = TraceRow {
            step,
            residual,
            step_gap: None,
            abscissa: map.linearization_stability(&x)?.abscissa,
            error_to_oracle: None,
        };
        if converged {
            trace.rows.push(row);
            trace.iterates.push(x.clone());
            return Ok(ConcaveSolution {
                x,
                residual,
                iterations: steps.len(),
                trace,
                steps,
            });
        }
        if steps.len() >= cfg.max_iter {
            return Err(Error::MaxIterExceeded {
                iterations: steps.len(),
                residual,
            });
        }
        let (y, report) = newton_step(prob, &x)?;
        steps.push(report);
        let p1 = *x1_norm.get_or_insert(y.spectral_norm()?);
        let diff = x.sub(&y);
        let gap = diff.min_eigenvalue()?;
        row.step_gap = Some(gap);
        trace.rows.push(row);
        trace.iterates.push(x.clone());
        if step >= 1 && gap < -cfg.mon_tol * (1.0 + p1) {
            return Err(Error::MonotonicityViolated { step, gap });
        }
        let small_step = diff.matrix().norm() <= cfg.step_tol * x.matrix().norm();
        x = y;
        if small_step {
            let residual = evaluate(map, &x).matrix().norm();
            trace.rows.push(TraceRow {
                step: step + 1,
                residual,
                step_gap: None,
                abscissa: map.linearization_stability(&x)?.abscissa,
                error_to_oracle: None,
            });
            trace.iterates.push(x.clone());
            return Ok(ConcaveSolution {
                x,
                residual,
                iterations: steps.len(),
                trace,
                steps,
            });
        }
    }
}

/// The regularized equation `P N P + 2a P = Q`, i.e. `F(P) = -2aP + Q - PNP`,
/// solved from `P0 = Q/(2a)`.
pub fn solve_regularized_sqrt(
    n: &SymOperator,
    q: &SymOperator,
    a: f64,
    cfg: &SolverConfig,
) -> Result<ConcaveSolution> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::NonPositiveA(a));
    }
    if n.dim() != q.dim() {
        return Err(Error::dims("sqrt N and Q", q.dim(), n.dim()));
    }
    let tol = ConeTolerances::default();
    for (name, m) in [("N", n), ("Q", q)] {
        if !is_psd(m, &tol)? {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive semidefinite (min eigenvalue {:.3e})",
                m.min_eigenvalue()?
            )));
        }
    }
    let dim = q.dim();
    let map = RiccatiMap::new(-Matrix::identity(dim, dim) * a, n, q, cfg.method)?.with_absolute_stop();
    let prob = ConcaveProblem::new(map, tol)?;
    let x0 = q.scale(1.0 / (2.0 * a));
    newton_solve(&prob, &x0, cfg)
}

/// `|P N P + 2a P - Q|_F`.
pub fn sqrt_residual(n: &SymOperator, q: &SymOperator, a: f64, p: &SymOperator) -> f64 {
    (p.matrix() * n.matrix() * p.matrix() + p.matrix() * (2.0 * a) - q.matrix()).norm()
}

/// Abscissa of `F'(P)` computed from the dense symmetric-coordinate matrix.
pub fn dense_linearization_abscissa<M: ConcaveMap + ?Sized>(map: &M, x: &SymOperator) -> Result<f64> {
    let g = assemble_linearization(map, x);
    Ok(eigenvalues(&g)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::{initial_guess, newton_kleinman, stabilize};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn s(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    fn random(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
    }

    fn scalar_problem() -> ConcaveProblem<RiccatiMap> {
        let sys = StateSpaceSystem::new(s(-1.0), s(1.0), s(1.0)).unwrap();
        let map = RiccatiMap::from_system(&sys, LyapunovMethod::Schur).unwrap();
        ConcaveProblem::new(map, ConeTolerances::default()).unwrap()
    }

    #[test]
    fn scalar_step_arithmetic() {
        let prob = scalar_problem();
        let (y, report) = newton_step(&prob, &SymOperator::from_diagonal(&[0.5])).unwrap();
        assert_relative_eq!(y.matrix()[(0, 0)], 5.0 / 12.0, epsilon = 1e-15);
        assert!(report.passed(), "{report:?}");
        let root = SymOperator::from_diagonal(&[2f64.sqrt() - 1.0]);
        let (y, _) = newton_step(&prob, &root).unwrap();
        assert_relative_eq!(y.matrix()[(0, 0)], root.matrix()[(0, 0)], epsilon = 1e-15);
    }

    #[test]
    fn riccati_aux_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 4;
        let b = random(n, 2, &mut rng);
        let c = random(2, n, &mut rng);
        let sys = StateSpaceSystem::new(random(n, n, &mut rng), b, c).unwrap();
        let map = RiccatiMap::from_system(&sys, LyapunovMethod::Schur).unwrap();
        let p = SymOperator::gram(&random(n, n, &mut rng));
        let r = SymOperator::gram(&random(n, n, &mut rng));
        let nm = sys.n_op();
        let l = map.l_map(&p);
        let expected = p.matrix() * nm.matrix() * p.matrix() + sys.q_op().matrix();
        assert!((l.matrix() - &expected).norm() <= 1e-12 * expected.norm());
        let generic = map.phi(&p).sub(&map.dphi(&p, &p));
        assert!((generic.matrix() - &expected).norm() <= 1e-12 * expected.norm());
        let d = p.sub(&r);
        let want = d.matrix() * nm.matrix() * d.matrix();
        let got = psi(&map, &p, &r);
        assert!((got.matrix() - &want).norm() <= 1e-10 * (1.0 + want.norm()));
    }

    #[test]
    fn dense_solve_agrees_with_lyapunov_path() {
        struct Dense(RiccatiMap);
        impl ConcaveMap for Dense {
            fn dim(&self) -> usize {
                self.0.dim()
            }
            fn linear(&self, x: &SymOperator) -> SymOperator {
                self.0.linear(x)
            }
            fn phi(&self, x: &SymOperator) -> SymOperator {
                self.0.phi(x)
            }
            fn dphi(&self, x: &SymOperator, y: &SymOperator) -> SymOperator {
                self.0.dphi(x, y)
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 5;
        let a = random(n, n, &mut rng) * 0.3 - Matrix::identity(n, n) * 2.0;
        let sys = StateSpaceSystem::new(a, random(n, 1, &mut rng), random(1, n, &mut rng)).unwrap();
        let fast = RiccatiMap::from_system(&sys, LyapunovMethod::Schur).unwrap();
        let dense = Dense(fast.clone());
        let x = SymOperator::gram(&(random(n, n, &mut rng) * 0.1));
        let rhs = SymOperator::gram(&random(n, n, &mut rng));
        let y1 = fast.solve_linearized(&x, &rhs).unwrap();
        let y2 = dense.solve_linearized(&x, &rhs).unwrap();
        assert!((y1.matrix() - y2.matrix()).norm() <= 1e-10 * y1.matrix().norm());
        let s1 = fast.linearization_stability(&x).unwrap();
        let s2 = dense.linearization_stability(&x).unwrap();
        assert_relative_eq!(s1.abscissa, s2.abscissa, max_relative = 1e-8);
        assert_relative_eq!(
            dense_linearization_abscissa(&fast, &x).unwrap(),
            s1.abscissa,
            max_relative = 1e-8
        );
    }

    #[test]
    fn engine_reproduces_newton_kleinman() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 6;
        let sys = StateSpaceSystem::new(
            random(n, n, &mut rng) / (n as f64).sqrt(),
            random(n, 2, &mut rng),
            random(2, n, &mut rng),
        )
        .unwrap();
        let k = stabilize(sys.a(), sys.b()).unwrap();
        let p0 = initial_guess(sys.a(), sys.b(), sys.c(), &k).unwrap();
        let cfg = SolverConfig::default();
        let (_, trace) = newton_kleinman(&sys, &p0, &cfg).unwrap();
        let map = RiccatiMap::from_system(&sys, cfg.method).unwrap();
        let prob = ConcaveProblem::new(map, ConeTolerances::default()).unwrap();
        let sol = newton_solve(&prob, &p0, &cfg).unwrap();
        assert_eq!(sol.trace.iterates.len(), trace.iterates.len());
        for (u, v) in sol.trace.iterates.iter().zip(&trace.iterates) {
            assert!((u.matrix() - v.matrix()).norm() <= 1e-12 * (1.0 + v.matrix().norm()));
        }
        assert!(sol.steps.iter().all(|r| r.passed()), "{:?}", sol.steps);
    }

    #[test]
    fn regularized_sqrt_examples() {
        let cfg = SolverConfig::default();
        let one = SymOperator::identity(1);
        let sol = solve_regularized_sqrt(&one, &one, 1.0, &cfg).unwrap();
        assert_relative_eq!(sol.x.matrix()[(0, 0)], 2f64.sqrt() - 1.0, epsilon = 1e-10);

        let q = SymOperator::from_diagonal(&[1.0, 2.0]);
        let sol = solve_regularized_sqrt(&SymOperator::zeros(2), &q, 2.0, &cfg).unwrap();
        assert_eq!(sol.iterations, 0);
        assert!((sol.x.matrix() - q.matrix() / 4.0).norm() <= 1e-15);

        let i3 = SymOperator::identity(3);
        let sol = solve_regularized_sqrt(&i3, &i3, 1.0, &cfg).unwrap();
        let want = Matrix::identity(3, 3) * (2f64.sqrt() - 1.0);
        assert!((sol.x.matrix() - want).norm() <= 1e-10);
        assert!(sqrt_residual(&i3, &i3, 1.0, &sol.x) <= 1e-10);

        assert_eq!(
            solve_regularized_sqrt(&one, &one, 0.0, &cfg).unwrap_err(),
            Error::NonPositiveA(0.0)
        );
    }

    #[test]
    fn constant_phi_is_a_single_linear_solve() {
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let q = SymOperator::from_diagonal(&[1.0, 3.0]);
        let map = RiccatiMap::new(a, &SymOperator::zeros(2), &q, LyapunovMethod::Schur).unwrap();
        let prob = ConcaveProblem::new(map, ConeTolerances::default()).unwrap();
        let sol = newton_solve(&prob, &SymOperator::zeros(2), &SolverConfig::default()).unwrap();
        assert_eq!(sol.iterations, 1);
    }

    #[test]
    fn negative_phi_zero_is_rejected() {
        let map = RiccatiMap::new(
            s(-1.0),
            &SymOperator::identity(1),
            &SymOperator::from_diagonal(&[-1.0]),
            LyapunovMethod::Schur,
        )
        .unwrap();
        assert!(matches!(
            ConcaveProblem::new(map, ConeTolerances::default()),
            Err(Error::ConeViolation { .. })
        ));
    }

    #[test]
    fn unstable_linearization_is_reported() {
        let sys = StateSpaceSystem::new(s(1.0), s(1.0), s(1.0)).unwrap();
        let map = RiccatiMap::from_system(&sys, LyapunovMethod::Schur).unwrap();
        let prob = ConcaveProblem::new(map, ConeTolerances::default()).unwrap();
        assert!(matches!(
            newton_step(&prob, &SymOperator::zeros(1)),
            Err(Error::LinearizationUnstable { .. })
        ));
    }

    #[test]
    fn shifted_problem_recovers_solution() {
        // Phi(0) = Q - 0 has a negative part; theta = 1 satisfies F(theta) >= 0
        // for A = -1/2, N = 1/4, Q = 0.5: F(1) = -1 + 0.5 - 0.25 < 0 fails, so
        // use A = -0.1: F(1) = -0.2 + 0.5 - 0.25 = 0.05 >= 0.
        let map = RiccatiMap::new(
            s(-0.1),
            &SymOperator::from_diagonal(&[0.25]),
            &SymOperator::from_diagonal(&[0.5]),
            LyapunovMethod::Schur,
        )
        .unwrap();
        let theta = SymOperator::from_diagonal(&[1.0]);
        let prob = ConcaveProblem::shifted(map.clone(), theta, ConeTolerances::default()).unwrap();
        let sol = newton_solve(&prob, &SymOperator::from_diagonal(&[2.0]), &SolverConfig::default())
            .unwrap();
        let x = prob.unshift(&sol.x);
        // -0.2 x - 0.25 x^2 + 0.5 = 0
        let root = (-0.2 + (0.04f64 + 0.5).sqrt()) / 0.5;
        assert_relative_eq!(x.matrix()[(0, 0)], root, epsilon = 1e-12);
        assert!(evaluate(&map, &x).matrix().norm() <= 1e-12);
        let bad = SymOperator::from_diagonal(&[5.0]);
        assert!(ConcaveProblem::shifted(map, bad, ConeTolerances::default()).is_err());
    }
}
