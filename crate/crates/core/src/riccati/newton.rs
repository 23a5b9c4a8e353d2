//! Newton-Kleinman iteration
//! `(A - N P_n)^T P_{n+1} + P_{n+1} (A - N P_n) = -Q - P_n N P_n`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::lyapunov::{solve_lyapunov_raw, LyapunovSolver};
use crate::operator::{relative_asymmetry, spectral_norm, Matrix, SymOperator};
use crate::semigroup::spectral_abscissa;

use super::hamiltonian::hamiltonian_oracle;
use super::hautus::{hautus_detectable, hautus_stabilizable};
use super::stabilize::{initial_guess, stabilizing_gains};
use super::{riccati_map, StateSpaceSystem};

/// `kappa` is only estimated up to this state dimension.
pub const KAPPA_MAX_DIM: usize = 100;

/// One row of the iteration trace, describing iterate `P_step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceRow {
    pub step: usize,
    /// `|F(P_step)|_F`.
    pub residual: f64,
    /// `lambda_min(P_step - P_(step+1))`; absent for the final iterate.
    pub step_gap: Option<f64>,
    /// Spectral abscissa of `A - B B^T P_step`.
    pub abscissa: f64,
    /// `|P_step - P_oracle|_F` when the oracle is enabled.
    pub error_to_oracle: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
    /// The iterates themselves, `iterates[k]` matching `rows[k]`.
    pub iterates: Vec<SymOperator>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// CSV with header `step,residual,stepGap,abscissa,errorToOracle`;
    /// absent values are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,residual,stepGap,abscissa,errorToOracle\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.16e},{},{:.16e},{}\n",
                r.step,
                r.residual,
                opt(r.step_gap),
                r.abscissa,
                opt(r.error_to_oracle)
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub p: SymOperator,
    /// Feedback gain `K = B^T P`.
    pub k: Matrix,
    pub closed_loop_abscissa: f64,
    pub residual: f64,
    /// `|G_cl^{-1}|_2 |B|_2^2`, `None` above [`KAPPA_MAX_DIM`].
    pub kappa: Option<f64>,
    /// Number of Lyapunov solves performed.
    pub iterations: usize,
}

/// Fault injection for certification runs.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutation {
    #[default]
    None,
    /// Right side `-Q + P_n N P_n` instead of `-Q - P_n N P_n`.
    FlipQuadraticSign,
}

/// Runs the iteration from `P0`.
///
/// With `cfg.oracle` set, the Hamiltonian oracle is computed first and every
/// trace row records its distance to it.
pub fn newton_kleinman(
    sys: &StateSpaceSystem,
    p0: &SymOperator,
    cfg: &SolverConfig,
) -> Result<(RiccatiSolution, IterationTrace)> {
    let oracle = if cfg.oracle {
        Some(hamiltonian_oracle(sys)?)
    } else {
        None
    };
    newton_kleinman_with(sys, p0, cfg, oracle.as_ref(), Mutation::None)
}

#[doc(hidden)]
pub fn newton_kleinman_with(
    sys: &StateSpaceSystem,
    p0: &SymOperator,
    cfg: &SolverConfig,
    oracle: Option<&SymOperator>,
    mutation: Mutation,
) -> Result<(RiccatiSolution, IterationTrace)> {
    cfg.validate()?;
    let n = sys.n();
    if p0.dim() != n {
        return Err(Error::dims("newton_kleinman P0", n, p0.dim()));
    }
    let a = sys.a();
    let nm = sys.n_op();
    let nmat = nm.matrix();
    let qmat = sys.q_op().into_matrix();
    let a_norm = a.norm();
    let q_norm = qmat.norm();
    let stop = |p: &SymOperator| cfg.rel_tol * (1.0 + q_norm + a_norm * p.matrix().norm());

    let mut trace = IterationTrace::default();
    let mut p = p0.clone();
    let mut p1_norm: Option<f64> = None;
    let mut solves = 0;

    loop {
        let step = trace.rows.len();
        let a_cl = a - nmat * p.matrix();
        let report = spectral_abscissa(&a_cl)?;
        if !report.is_stable {
            return Err(Error::IterateNotStabilizing {
                step,
                abscissa: report.abscissa,
            });
        }
        let residual = riccati_map(a, nmat, &qmat, p.matrix()).norm();
        let error_to_oracle = oracle.map(|o| (p.matrix() - o.matrix()).norm());
        let mut row = TraceRow {
            step,
            residual,
            step_gap: None,
            abscissa: report.abscissa,
            error_to_oracle,
        };
        if residual <= stop(&p) {
            trace.rows.push(row);
            trace.iterates.push(p.clone());
            return finish(sys, p, report.abscissa, residual, solves, cfg, trace);
        }
        if solves >= cfg.max_iter {
            return Err(Error::MaxIterExceeded {
                iterations: solves,
                residual,
            });
        }

        let pnp = SymOperator::symmetrized(&(p.matrix() * nmat * p.matrix())).into_matrix();
        let rhs = match mutation {
            Mutation::None => &qmat + &pnp,
            Mutation::FlipQuadraticSign => &qmat - &pnp,
        };
        let raw = solve_lyapunov_raw(&a_cl, &rhs, cfg.method)?;
        solves += 1;
        let asymmetry = relative_asymmetry(&raw);
        if asymmetry > 1e-8 {
            return Err(Error::AsymmetricIterate { step, asymmetry });
        }
        let next = SymOperator::symmetrized(&raw);
        let p1 = *p1_norm.get_or_insert(next.spectral_norm()?);
        let diff = p.sub(&next);
        let gap = diff.min_eigenvalue()?;
        row.step_gap = Some(gap);
        trace.rows.push(row);
        trace.iterates.push(p.clone());
        if step >= 1 && gap < -cfg.mon_tol * (1.0 + p1) {
            return Err(Error::MonotonicityViolated { step, gap });
        }
        let small_step = diff.matrix().norm() <= cfg.step_tol * p.matrix().norm();
        p = next;
        if small_step {
            let a_cl = a - nmat * p.matrix();
            let report = spectral_abscissa(&a_cl)?;
            if !report.is_stable {
                return Err(Error::IterateNotStabilizing {
                    step: step + 1,
                    abscissa: report.abscissa,
                });
            }
            let residual = riccati_map(a, nmat, &qmat, p.matrix()).norm();
            trace.rows.push(TraceRow {
                step: step + 1,
                residual,
                step_gap: None,
                abscissa: report.abscissa,
                error_to_oracle: oracle.map(|o| (p.matrix() - o.matrix()).norm()),
            });
            trace.iterates.push(p.clone());
            return finish(sys, p, report.abscissa, residual, solves, cfg, trace);
        }
    }
}

fn finish(
    sys: &StateSpaceSystem,
    p: SymOperator,
    abscissa: f64,
    residual: f64,
    iterations: usize,
    cfg: &SolverConfig,
    trace: IterationTrace,
) -> Result<(RiccatiSolution, IterationTrace)> {
    let k = sys.b().transpose() * p.matrix();
    let kappa = if sys.n() <= KAPPA_MAX_DIM && sys.n() > 0 {
        let a_cl = sys.a() - sys.b() * &k;
        Some(kappa_estimate(&a_cl, sys.b(), cfg.seed)?)
    } else {
        None
    };
    Ok((
        RiccatiSolution {
            p,
            k,
            closed_loop_abscissa: abscissa,
            residual,
            kappa,
            iterations,
        },
        trace,
    ))
}

const KAPPA_POWER_ITERS: usize = 500;

/// `|G^{-1}|_2 |B|_2^2` where `G` is the Kronecker Lyapunov generator of the
/// stable closed loop `a_cl`.
///
/// `|G^{-1}|_2^2` is the top eigenvalue of `G^{-T} G^{-1}`, found by power
/// iteration; each application is a pair of Schur-based Lyapunov solves
/// (`G^{-1}` with `a_cl`, `G^{-T}` with `a_cl^T`).
pub fn kappa_estimate(a_cl: &Matrix, b: &Matrix, seed: u64) -> Result<f64> {
    let n = a_cl.nrows();
    let forward = LyapunovSolver::new(a_cl)?;
    let adjoint = LyapunovSolver::new(&a_cl.transpose())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x006b_6170_7061);
    let mut v = Matrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    v /= v.norm();
    let mut lambda = 0.0_f64;
    for _ in 0..KAPPA_POWER_ITERS {
        let w = forward.solve_raw(&v)?;
        let z = adjoint.solve_raw(&w)?;
        let next = w.norm_squared();
        let zn = z.norm();
        if zn == 0.0 {
            break;
        }
        v = z / zn;
        let done = (next - lambda).abs() <= 1e-12 * next;
        lambda = next;
        if done {
            break;
        }
    }
    Ok(lambda.sqrt() * spectral_norm(b)?.powi(2))
}

/// Result of checking `e_(n+1) <= 1.5 kappa e_n^2` on oracle errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct QuadraticReport {
    pub kappa: f64,
    /// Steps with `e_n <= 1/(2 kappa)` are checked.
    pub basin: f64,
    /// Errors below this level are indistinguishable from the oracle's own error.
    pub floor: f64,
    pub checked: usize,
    pub at_floor: usize,
    /// Steps outside the basin, reported only.
    pub informational: usize,
    /// `(n, e_n, e_(n+1), bound)` for violated steps.
    pub failures: Vec<(usize, f64, f64, f64)>,
}

impl QuadraticReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub const QUADRATIC_SLACK: f64 = 0.5;

/// Verifies the quadratic contraction on the trace's oracle errors.
///
/// The smallest recorded error is taken as the resolution of the reference
/// solution; a step whose successor error lies within ten times that level
/// counts as converged rather than as evidence either way.
pub fn quadratic_convergence_check(
    trace: &IterationTrace,
    p: &SymOperator,
    kappa: f64,
) -> QuadraticReport {
    let errors: Vec<f64> = trace
        .rows
        .iter()
        .filter_map(|r| r.error_to_oracle)
        .collect();
    let resolution = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = 10.0 * resolution.max(1e-13 * (1.0 + p.matrix().norm()));
    let basin = 1.0 / (2.0 * kappa);
    let mut report = QuadraticReport {
        kappa,
        basin,
        floor,
        checked: 0,
        at_floor: 0,
        informational: 0,
        failures: Vec::new(),
    };
    for (n, pair) in errors.windows(2).enumerate() {
        let (e, e_next) = (pair[0], pair[1]);
        if e > basin {
            report.informational += 1;
            continue;
        }
        if e_next <= floor {
            report.at_floor += 1;
            continue;
        }
        report.checked += 1;
        let bound = (1.0 + QUADRATIC_SLACK) * kappa * e * e;
        if e_next > bound {
            report.failures.push((n, e, e_next, bound));
        }
    }
    report
}

/// Everything produced by the full pipeline.
#[derive(Debug, Clone)]
pub struct RiccatiRun {
    pub solution: RiccatiSolution,
    pub trace: IterationTrace,
    pub gain0: Matrix,
    pub p0: SymOperator,
    pub oracle: Option<SymOperator>,
}

/// Hautus checks, stabilizing gain (or the supplied `k0`), initial guess,
/// Newton-Kleinman and, when enabled, the oracle comparison.
pub fn solve_riccati(
    sys: &StateSpaceSystem,
    cfg: &SolverConfig,
    k0: Option<&Matrix>,
) -> Result<RiccatiRun> {
    solve_riccati_with(sys, cfg, k0, Mutation::None)
}

#[doc(hidden)]
pub fn solve_riccati_with(
    sys: &StateSpaceSystem,
    cfg: &SolverConfig,
    k0: Option<&Matrix>,
    mutation: Mutation,
) -> Result<RiccatiRun> {
    cfg.validate()?;
    if !hautus_stabilizable(sys.a(), sys.b())? {
        return Err(Error::NotStabilizable);
    }
    if !hautus_detectable(sys.c(), sys.a())? {
        return Err(Error::NotDetectable);
    }
    let (gain0, p0) = match k0 {
        Some(k) => (k.clone(), initial_guess(sys.a(), sys.b(), sys.c(), k)?),
        None => best_start(sys)?,
    };
    let oracle = if cfg.oracle {
        Some(hamiltonian_oracle(sys)?)
    } else {
        None
    };
    let (solution, trace) = newton_kleinman_with(sys, &p0, cfg, oracle.as_ref(), mutation)?;
    Ok(RiccatiRun {
        solution,
        trace,
        gain0,
        p0,
        oracle,
    })
}

/// The stabilizing gain whose `P0` has the smallest trace; Newton needs
/// roughly one step per halving of `P0 - P`.
fn best_start(sys: &StateSpaceSystem) -> Result<(Matrix, SymOperator)> {
    let mut best: Option<(Matrix, SymOperator)> = None;
    let mut last_err = None;
    for k in stabilizing_gains(sys.a(), sys.b())? {
        match initial_guess(sys.a(), sys.b(), sys.c(), &k) {
            Ok(p0) => {
                if best.as_ref().is_none_or(|(_, b)| p0.matrix().trace() < b.matrix().trace()) {
                    best = Some((k, p0));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one gain"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::{lyapunov_generator, solve_lyapunov, LyapunovMethod};
    use crate::operator::singular_values;
    use approx::assert_relative_eq;

    fn scalar(a: f64, b: f64, c: f64) -> StateSpaceSystem {
        StateSpaceSystem::new(
            Matrix::from_element(1, 1, a),
            Matrix::from_element(1, 1, b),
            Matrix::from_element(1, 1, c),
        )
        .unwrap()
    }

    fn random_system(n: usize, m: usize, p: usize, seed: u64) -> StateSpaceSystem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = |r: usize, c: usize| {
            Matrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng))
        };
        let a = g(n, n) / (n as f64).sqrt();
        StateSpaceSystem::new(a, g(n, m), g(p, n)).unwrap()
    }

    #[test]
    fn scalar_converges_to_root() {
        let sys = scalar(-1.0, 1.0, 1.0);
        let p0 = SymOperator::from_diagonal(&[0.5]);
        let cfg = SolverConfig {
            oracle: true,
            rel_tol: 1e-14,
            ..Default::default()
        };
        let (sol, trace) = newton_kleinman(&sys, &p0, &cfg).unwrap();
        assert_relative_eq!(sol.p.matrix()[(0, 0)], 2f64.sqrt() - 1.0, epsilon = 1e-12);
        assert!(sol.iterations <= 6);
        assert!(sol.residual <= 1e-12);
        // first step value 5/12
        assert_relative_eq!(trace.iterates[1].matrix()[(0, 0)], 5.0 / 12.0, epsilon = 1e-15);
        // kappa = |B|^2 / (2 |a_cl|), a_cl = -sqrt 2
        assert_relative_eq!(sol.kappa.unwrap(), 1.0 / (2.0 * 2f64.sqrt()), epsilon = 1e-12);
        assert_relative_eq!(sol.k[(0, 0)], sol.p.matrix()[(0, 0)]);
    }

    #[test]
    fn zero_input_reduces_to_lyapunov() {
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -2.0]);
        let c = Matrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let sys = StateSpaceSystem::new(a.clone(), Matrix::zeros(2, 1), c.clone()).unwrap();
        let (sol, _) = newton_kleinman(&sys, &SymOperator::zeros(2), &SolverConfig::default())
            .unwrap();
        assert_eq!(sol.iterations, 1);
        let l = solve_lyapunov(&a, &SymOperator::gram(&c), LyapunovMethod::Schur).unwrap();
        assert!((sol.p.matrix() - l.matrix()).norm() <= 1e-14);
    }

    #[test]
    fn zero_output_gives_zero_solution() {
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -2.0]);
        let sys = StateSpaceSystem::new(a, Matrix::identity(2, 2), Matrix::zeros(1, 2)).unwrap();
        let (sol, trace) =
            newton_kleinman(&sys, &SymOperator::zeros(2), &SolverConfig::default()).unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.p, SymOperator::zeros(2));
        assert_eq!(trace.len(), 1);
    }

    #[test]
    fn random_system_matches_oracle_and_is_monotone() {
        let sys = random_system(8, 2, 2, 17);
        let cfg = SolverConfig {
            oracle: true,
            ..Default::default()
        };
        let run = solve_riccati(&sys, &cfg, None).unwrap();
        let oracle = run.oracle.as_ref().unwrap();
        let d = (run.solution.p.matrix() - oracle.matrix()).norm();
        assert!(d <= 1e-7 * (1.0 + oracle.matrix().norm()), "{d}");
        assert!(run.solution.closed_loop_abscissa < 0.0);
        for r in &run.trace.rows[1..] {
            if let Some(g) = r.step_gap {
                assert!(g >= -1e-8 * (1.0 + run.trace.iterates[1].spectral_norm().unwrap()));
            }
            assert!(r.abscissa < 0.0);
        }
        let q = quadratic_convergence_check(&run.trace, oracle, run.solution.kappa.unwrap());
        assert!(q.passed(), "{q:?}");
    }

    #[test]
    fn kappa_matches_dense_generator() {
        for seed in 0..4 {
            let n = 2 + seed as usize;
            let sys = random_system(n, 1, 1, 300 + seed);
            let run = solve_riccati(&sys, &SolverConfig::default(), None).unwrap();
            let a_cl = sys.a() - sys.b() * &run.solution.k;
            let g = lyapunov_generator(&a_cl).g;
            let sv = singular_values(&g).unwrap();
            let b2 = singular_values(sys.b()).unwrap()[0].powi(2);
            let dense = b2 / sv.last().unwrap();
            assert_relative_eq!(run.solution.kappa.unwrap(), dense, max_relative = 1e-6);
        }
    }

    #[test]
    fn mutation_breaks_the_iteration() {
        let sys = random_system(6, 2, 2, 5);
        let cfg = SolverConfig::default();
        let k = crate::riccati::stabilize(sys.a(), sys.b()).unwrap();
        let p0 = initial_guess(sys.a(), sys.b(), sys.c(), &k).unwrap();
        let oracle = hamiltonian_oracle(&sys).unwrap();
        let out = newton_kleinman_with(&sys, &p0, &cfg, Some(&oracle), Mutation::FlipQuadraticSign);
        match out {
            Err(_) => {}
            Ok((sol, _)) => {
                let d = (sol.p.matrix() - oracle.matrix()).norm();
                assert!(d > 1e-7 * (1.0 + oracle.matrix().norm()));
            }
        }
    }

    #[test]
    fn nonstabilizable_pipeline_error() {
        let sys = scalar(1.0, 0.0, 1.0);
        assert_eq!(
            solve_riccati(&sys, &SolverConfig::default(), None).unwrap_err(),
            Error::NotStabilizable
        );
    }

    #[test]
    fn max_iter_is_enforced() {
        let sys = random_system(5, 1, 1, 8);
        let cfg = SolverConfig {
            max_iter: 1,
            ..Default::default()
        };
        assert!(matches!(
            solve_riccati(&sys, &cfg, None),
            Err(Error::MaxIterExceeded { .. })
        ));
    }

    #[test]
    fn non_stabilizing_start_is_reported() {
        let sys = scalar(1.0, 1.0, 1.0);
        let cfg = SolverConfig::default();
        assert!(matches!(
            newton_kleinman(&sys, &SymOperator::zeros(1), &cfg),
            Err(Error::IterateNotStabilizing { step: 0, .. })
        ));
    }

    #[test]
    fn trace_csv_layout() {
        let sys = scalar(-1.0, 1.0, 1.0);
        let (_, trace) = newton_kleinman(
            &sys,
            &SymOperator::from_diagonal(&[0.5]),
            &SolverConfig::default(),
        )
        .unwrap();
        let csv = trace.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("step,residual,stepGap,abscissa,errorToOracle"));
        let last = csv.lines().last().unwrap();
        assert!(last.ends_with(','));
        assert_eq!(csv.lines().count(), trace.len() + 1);
    }
}
