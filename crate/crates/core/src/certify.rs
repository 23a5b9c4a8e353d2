//! Self-certification suites run by `kleinman certify` and the acceptance tests.
//!
//! Each suite is a list of checks with pinned tolerances; a suite passes when
//! every non-informational check passes.

use std::cell::OnceCell;
use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::banach::{check_ls_ii, induced_norm, quadratic_sup, LpSpace, DEFAULT_RESTARTS, NORM_INFLATION};
use crate::concave::{solve_regularized_sqrt, sqrt_residual};
use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::io::{heat_default_nodes, heat_demo, heat_shift_for_abscissa};
use crate::lyapunov::{lyapunov_residual, residual_scale, solve_lyapunov, wonham_equivalence, LyapunovMethod};
use crate::operator::{is_psd, ConeTolerances, Matrix, SymOperator};
use crate::riccati::{
    detectability_margin, dichotomous_gain, hamiltonian_oracle, hautus_detectable, quadratic_convergence_check, solve_riccati_with,
    stabilizability_margin, Mutation, RiccatiRun, StateSpaceSystem,
};
use crate::semigroup::{expm, lyapunov_semigroup_apply, spectral_abscissa};

pub const SUITE_NAMES: [&str; 11] = [
    "scalar ground truth",
    "oracle equivalence",
    "monotonicity",
    "quadratic convergence",
    "Wonham equivalence",
    "Lyapunov cross-validation",
    "Lyapunov semigroup",
    "Banach geometry",
    "regularized square root",
    "dichotomous gain",
    "heat demo",
];

/// Minimum Hautus margin of generated random systems.
pub const ADMISSIBLE_MARGIN: f64 = 0.1;
/// Largest `|P_H|_F` of generated random systems. Beyond it the equation is
/// too ill conditioned for the fixed tolerances of the suites.
pub const ADMISSIBLE_MAX_NORM: f64 = 1e5;
const RANDOM_SYSTEMS: usize = 50;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub label: String,
    pub passed: bool,
    pub detail: String,
    /// Reported but not part of the verdict.
    pub informational: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub id: usize,
    pub name: &'static str,
    pub checks: Vec<Check>,
    #[serde(serialize_with = "as_secs")]
    pub elapsed: Duration,
}

fn as_secs<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| !c.informational).all(|c| c.passed)
    }
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        writeln!(
            f,
            "{:>2}  {:<26} {verdict}  ({:.2} s)",
            self.id,
            self.name,
            self.elapsed.as_secs_f64()
        )?;
        for c in &self.checks {
            let mark = match (c.informational, c.passed) {
                (true, _) => "info",
                (false, true) => "ok",
                (false, false) => "FAIL",
            };
            writeln!(f, "      [{mark:>4}] {}: {}", c.label, c.detail)?;
        }
        Ok(())
    }
}

fn check(label: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        label: label.into(),
        passed,
        detail: detail.into(),
        informational: false,
    }
}

fn info(label: impl Into<String>, detail: impl Into<String>) -> Check {
    Check {
        label: label.into(),
        passed: true,
        detail: detail.into(),
        informational: true,
    }
}

fn randn(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// Random system with `n` in `2..=32`, `m, p` in `1..=max(1, n/4)`,
/// `A = randn / sqrt(n)`, resampled until both Hautus margins reach
/// [`ADMISSIBLE_MARGIN`] and the Hamiltonian solution is no larger than
/// [`ADMISSIBLE_MAX_NORM`].
pub fn random_admissible(rng: &mut ChaCha8Rng) -> Result<StateSpaceSystem> {
    loop {
        let n = rng.random_range(2..=32);
        let hi = (n / 4).max(1);
        let m = rng.random_range(1..=hi);
        let p = rng.random_range(1..=hi);
        let a = randn(n, n, rng) / (n as f64).sqrt();
        let b = randn(n, m, rng);
        let c = randn(p, n, rng);
        if stabilizability_margin(&a, &b)? < ADMISSIBLE_MARGIN || detectability_margin(&c, &a)? < ADMISSIBLE_MARGIN {
            continue;
        }
        let sys = StateSpaceSystem::new(a, b, c)?;
        if hamiltonian_oracle(&sys).is_ok_and(|p| p.matrix().norm() <= ADMISSIBLE_MAX_NORM) {
            return Ok(sys);
        }
    }
}

struct RandomRuns {
    runs: Vec<(StateSpaceSystem, Result<RiccatiRun>)>,
    elapsed: Duration,
}

/// Runs the suites with a common seed and optional fault injection.
pub struct Certifier {
    seed: u64,
    mutation: Mutation,
    random: OnceCell<RandomRuns>,
}

fn worst(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn fails<T>(items: &[(usize, T)]) -> String
where
    T: fmt::Display,
{
    let shown: Vec<String> = items.iter().take(4).map(|(i, t)| format!("#{i}: {t}")).collect();
    shown.join("; ")
}

impl Certifier {
    pub fn new(seed: u64) -> Self {
        Self::with_mutation(seed, Mutation::None)
    }

    #[doc(hidden)]
    pub fn with_mutation(seed: u64, mutation: Mutation) -> Self {
        Self {
            seed,
            mutation,
            random: OnceCell::new(),
        }
    }

    fn rng(&self, suite: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(1_000_003).wrapping_add(suite))
    }

    pub fn run(&self, id: usize) -> Result<SuiteResult> {
        let name = *SUITE_NAMES
            .get(id.wrapping_sub(1))
            .ok_or_else(|| Error::InvalidParameter(format!("no suite {id} (expected 1..=11)")))?;
        let start = Instant::now();
        let checks = match id {
            1 => self.scalar(),
            2 => self.oracle(),
            3 => self.monotonicity(),
            4 => self.quadratic(),
            5 => self.wonham(),
            6 => self.lyapunov(),
            7 => self.semigroup(),
            8 => self.banach(),
            9 => self.sqrt(),
            10 => self.dichotomy(),
            _ => self.heat(),
        };
        let mut elapsed = start.elapsed();
        if (2..=4).contains(&id) {
            // shared runs are charged to every suite that reads them
            elapsed = elapsed.max(self.random_runs().elapsed);
        }
        Ok(SuiteResult {
            id,
            name,
            checks: checks?,
            elapsed,
        })
    }

    pub fn run_all(&self) -> Result<Vec<SuiteResult>> {
        (1..=SUITE_NAMES.len()).map(|id| self.run(id)).collect()
    }

    fn solve(&self, sys: &StateSpaceSystem, cfg: &SolverConfig) -> Result<RiccatiRun> {
        solve_riccati_with(sys, cfg, None, self.mutation)
    }

    fn scalar(&self) -> Result<Vec<Check>> {
        let one = Matrix::from_element(1, 1, 1.0);
        let sys = StateSpaceSystem::new(-&one, one.clone(), one)?;
        let start = Instant::now();
        let run = self.solve(&sys, &SolverConfig::default());
        let elapsed = start.elapsed().as_secs_f64();
        let mut out = Vec::new();
        match run {
            Ok(run) => {
                let err = (run.solution.p.matrix()[(0, 0)] - (2f64.sqrt() - 1.0)).abs();
                out.push(check("P = sqrt(2) - 1", err <= 1e-10, format!("|P - (sqrt 2 - 1)| = {err:.2e} (tol 1e-10)")));
            }
            Err(e) => out.push(check("P = sqrt(2) - 1", false, e.to_string())),
        }
        out.push(check("runtime", elapsed < 0.1, format!("{elapsed:.4} s (limit 0.1 s)")));
        Ok(out)
    }

    fn random_runs(&self) -> &RandomRuns {
        self.random.get_or_init(|| {
            let start = Instant::now();
            let mut rng = self.rng(2);
            let cfg = SolverConfig {
                oracle: true,
                seed: self.seed,
                ..Default::default()
            };
            let runs = (0..RANDOM_SYSTEMS)
                .map(|_| match random_admissible(&mut rng) {
                    Ok(sys) => {
                        let run = self.solve(&sys, &cfg);
                        (sys, run)
                    }
                    Err(e) => (StateSpaceSystem::new(Matrix::zeros(0, 0), Matrix::zeros(0, 0), Matrix::zeros(0, 0)).expect("empty system"), Err(e)),
                })
                .collect();
            RandomRuns {
                runs,
                elapsed: start.elapsed(),
            }
        })
    }

    fn oracle(&self) -> Result<Vec<Check>> {
        let rr = self.random_runs();
        let mut bad = Vec::new();
        let mut errors = Vec::new();
        for (i, (_, run)) in rr.runs.iter().enumerate() {
            match run {
                Ok(run) => {
                    let o = run.oracle.as_ref().expect("oracle enabled");
                    let rel = (run.solution.p.matrix() - o.matrix()).norm() / (1.0 + o.matrix().norm());
                    errors.push(rel);
                    if rel > 1e-7 {
                        bad.push((i, format!("{rel:.2e}")));
                    }
                }
                Err(e) => bad.push((i, e.to_string())),
            }
        }
        let dims: Vec<usize> = rr.runs.iter().map(|(s, _)| s.n()).collect();
        let secs = rr.elapsed.as_secs_f64();
        Ok(vec![
            check(
                "|P - P_H|_F <= 1e-7 (1 + |P_H|_F)",
                bad.is_empty(),
                if bad.is_empty() {
                    format!("{}/{} systems, worst {:.2e}", rr.runs.len(), rr.runs.len(), worst(errors))
                } else {
                    format!("{} failing: {}", bad.len(), fails(&bad))
                },
            ),
            info(
                "dimensions",
                format!("n in {}..={}", dims.iter().min().unwrap_or(&0), dims.iter().max().unwrap_or(&0)),
            ),
            check("runtime", secs < 60.0, format!("{secs:.2} s (limit 60 s)")),
        ])
    }

    fn monotonicity(&self) -> Result<Vec<Check>> {
        let rr = self.random_runs();
        let mut mono = Vec::new();
        let mut stab = Vec::new();
        let mut worst_gap = f64::INFINITY;
        for (i, (_, run)) in rr.runs.iter().enumerate() {
            let run = match run {
                Ok(run) => run,
                Err(e) => {
                    mono.push((i, e.to_string()));
                    continue;
                }
            };
            let p1 = run.trace.iterates.get(1).map_or(Ok(0.0), |p| p.spectral_norm())?;
            let tol = 1e-8 * (1.0 + p1);
            for row in run.trace.rows.iter().skip(1) {
                if let Some(gap) = row.step_gap {
                    worst_gap = worst_gap.min(gap / (1.0 + p1));
                    if gap < -tol {
                        mono.push((i, format!("step {} gap {gap:.2e}", row.step)));
                    }
                }
            }
            if let Some(row) = run.trace.rows.iter().find(|r| !(r.abscissa < 0.0)) {
                stab.push((i, format!("step {} abscissa {:.2e}", row.step, row.abscissa)));
            }
        }
        Ok(vec![
            check(
                "lambda_min(P_n - P_n+1) >= -1e-8 (1 + |P_1|_2), n >= 1",
                mono.is_empty(),
                if mono.is_empty() {
                    format!("all runs, smallest relative gap {worst_gap:.2e}")
                } else {
                    fails(&mono)
                },
            ),
            check(
                "closed-loop abscissa < 0 at every iterate",
                stab.is_empty(),
                if stab.is_empty() { "all runs".to_string() } else { fails(&stab) },
            ),
        ])
    }

    fn quadratic(&self) -> Result<Vec<Check>> {
        let rr = self.random_runs();
        let mut quad = Vec::new();
        let mut iters = Vec::new();
        let (mut checked, mut max_iter) = (0, 0);
        for (i, (_, run)) in rr.runs.iter().enumerate() {
            let run = match run {
                Ok(run) => run,
                Err(e) => {
                    quad.push((i, e.to_string()));
                    continue;
                }
            };
            let Some(kappa) = run.solution.kappa else {
                quad.push((i, "kappa not computed".to_string()));
                continue;
            };
            let report = quadratic_convergence_check(&run.trace, run.oracle.as_ref().expect("oracle enabled"), kappa);
            checked += report.checked;
            if let Some(&(n, e, e1, bound)) = report.failures.first() {
                quad.push((i, format!("step {n}: e = {e:.2e}, e' = {e1:.2e} > {bound:.2e}")));
            }
            max_iter = max_iter.max(run.solution.iterations);
            if run.solution.iterations > 15 {
                iters.push((i, run.solution.iterations));
            }
        }
        Ok(vec![
            check(
                "e_n+1 <= 1.5 kappa e_n^2 when e_n <= 1/(2 kappa)",
                quad.is_empty(),
                if quad.is_empty() {
                    format!("{checked} steps checked")
                } else {
                    fails(&quad)
                },
            ),
            check(
                "iterations <= 15",
                iters.is_empty(),
                if iters.is_empty() { format!("max {max_iter}") } else { fails(&iters) },
            ),
        ])
    }

    fn wonham(&self) -> Result<Vec<Check>> {
        let mut rng = self.rng(5);
        let tol = ConeTolerances::default();
        let start = Instant::now();
        let mut bad = Vec::new();
        let (mut done, mut resampled) = (0, 0);
        while done < 100 {
            let stable = done < 50;
            let n = rng.random_range(2..=12);
            let a0 = randn(n, n, &mut rng) / (n as f64).sqrt();
            let alpha = spectral_abscissa(&a0)?.abscissa;
            let target = rng.random_range(0.1..1.0) * if stable { -1.0 } else { 1.0 };
            let a = a0 - Matrix::identity(n, n) * (alpha - target);
            let p = rng.random_range(1..=n);
            let c = randn(p, n, &mut rng);
            if !hautus_detectable(&c, &a)? {
                resampled += 1;
                continue;
            }
            let r = match wonham_equivalence(&a, &c, &tol) {
                Ok(r) if r.cond_i.is_some() => r,
                Ok(_) | Err(Error::SpectrumDegenerate { .. }) => {
                    resampled += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let agree = r.cond_i == Some(r.cond_ii) && r.cond_ii == r.cond_iii && r.cond_ii == stable;
            if !agree {
                bad.push((done, format!("{:?}/{}/{}", r.cond_i, r.cond_ii, r.cond_iii)));
            }
            done += 1;
        }
        let secs = start.elapsed().as_secs_f64();
        Ok(vec![
            check(
                "cond_i = cond_ii = cond_iii",
                bad.is_empty(),
                if bad.is_empty() {
                    "100/100 (50 stable, 50 unstable)".to_string()
                } else {
                    fails(&bad)
                },
            ),
            info("resampled", format!("{resampled} draws (undetectable or degenerate spectrum)")),
            check("runtime", secs < 30.0, format!("{secs:.2} s (limit 30 s)")),
        ])
    }

    fn lyapunov(&self) -> Result<Vec<Check>> {
        let mut rng = self.rng(6);
        let (mut agree, mut resid) = (Vec::new(), Vec::new());
        let (mut worst_diff, mut worst_res) = (0.0_f64, 0.0_f64);
        for i in 0..50 {
            let n = rng.random_range(2..=30);
            let a0 = randn(n, n, &mut rng) / (n as f64).sqrt();
            let shift = spectral_abscissa(&a0)?.abscissa + rng.random_range(0.1..2.0);
            let a = a0 - Matrix::identity(n, n) * shift;
            let q = SymOperator::gram(&randn(rng.random_range(1..=n), n, &mut rng));
            let ps = solve_lyapunov(&a, &q, LyapunovMethod::Schur);
            let pk = solve_lyapunov(&a, &q, LyapunovMethod::Kron);
            let (ps, pk) = match (ps, pk) {
                (Ok(s), Ok(k)) => (s, k),
                (Err(e), _) | (_, Err(e)) => {
                    agree.push((i, e.to_string()));
                    continue;
                }
            };
            let diff = (ps.matrix() - pk.matrix()).norm() / pk.matrix().norm().max(f64::MIN_POSITIVE);
            worst_diff = worst_diff.max(diff);
            if diff > 1e-8 {
                agree.push((i, format!("{diff:.2e}")));
            }
            for p in [&ps, &pk] {
                let r = lyapunov_residual(&a, q.matrix(), p.matrix()) / residual_scale(&a, q.matrix(), p.matrix());
                worst_res = worst_res.max(r);
                if r > 1e-10 {
                    resid.push((i, format!("{r:.2e}")));
                }
            }
        }
        Ok(vec![
            check(
                "Schur and Kronecker agree to 1e-8",
                agree.is_empty(),
                if agree.is_empty() { format!("50/50, worst {worst_diff:.2e}") } else { fails(&agree) },
            ),
            check(
                "relative residual <= 1e-10",
                resid.is_empty(),
                if resid.is_empty() { format!("worst {worst_res:.2e}") } else { fails(&resid) },
            ),
        ])
    }

    fn semigroup(&self) -> Result<Vec<Check>> {
        let mut rng = self.rng(7);
        let tol = ConeTolerances::default();
        let (mut pos, mut law, mut expm_law, mut fd) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut ratios = Vec::new();
        for i in 0..100 {
            let n = rng.random_range(2..=8);
            let a0 = randn(n, n, &mut rng);
            let a = &a0 * (rng.random_range(1.0..5.0) / crate::operator::spectral_norm(&a0)?);
            let p = SymOperator::gram(&randn(rng.random_range(1..=n), n, &mut rng));
            let t = rng.random_range(0.0..3.0);
            if !is_psd(&lyapunov_semigroup_apply(&a, &p, t)?, &tol)? {
                pos.push((i, format!("t = {t:.3}")));
            }
            let (s, u) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
            let twice = lyapunov_semigroup_apply(&a, &lyapunov_semigroup_apply(&a, &p, s)?, u)?;
            let once = lyapunov_semigroup_apply(&a, &p, s + u)?;
            let rel = (twice.matrix() - once.matrix()).norm() / once.matrix().norm().max(f64::MIN_POSITIVE);
            if rel > 1e-8 {
                law.push((i, format!("{rel:.2e}")));
            }
            let lhs = expm(&a, s)? * expm(&a, u)?;
            let rhs = expm(&a, s + u)?;
            let rel = (&lhs - &rhs).norm() / rhs.norm();
            if rel > 1e-9 {
                expm_law.push((i, format!("{rel:.2e}")));
            }
            if i < 20 {
                let gen = a.transpose() * p.matrix() + p.matrix() * &a;
                let err = |h: f64| -> Result<f64> {
                    let th = lyapunov_semigroup_apply(&a, &p, h)?;
                    Ok(((th.matrix() - p.matrix()) / h - &gen).norm())
                };
                let ratio = err(1e-4)? / err(1e-5)?;
                ratios.push(ratio);
                if !(8.0..=12.0).contains(&ratio) {
                    fd.push((i, format!("{ratio:.3}")));
                }
            }
        }
        let (lo, hi) = ratios
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &r| (l.min(r), h.max(r)));
        let summary = |v: &Vec<(usize, String)>, ok: &str| if v.is_empty() { ok.to_string() } else { fails(v) };
        Ok(vec![
            check("positivity", pos.is_empty(), summary(&pos, "100/100 PSD")),
            check("Lyapunov semigroup law (1e-8)", law.is_empty(), summary(&law, "100/100")),
            check("exp(sA) exp(tA) = exp((s+t)A) (1e-9)", expm_law.is_empty(), summary(&expm_law, "100/100")),
            check(
                "finite-difference generator ratio in [8, 12]",
                fd.is_empty(),
                if fd.is_empty() { format!("ratios in [{lo:.3}, {hi:.3}]") } else { fails(&fd) },
            ),
        ])
    }

    fn banach(&self) -> Result<Vec<Check>> {
        let mut rng = self.rng(8);
        let exps = [1.5, 2.0, 3.0, f64::INFINITY];
        let mut out = Vec::new();
        let seed = self.seed;
        for &pe in &exps {
            let mut worst_ratio: f64 = 1.0;
            let mut bad = Vec::new();
            let mut psd_worst: f64 = 1.0;
            for i in 0..10 {
                let n = rng.random_range(2..=8);
                let g = randn(n, n, &mut rng);
                let p = SymOperator::symmetrized(&(&g + g.transpose()));
                let space = LpSpace::new(n, pe)?;
                let quad = quadratic_sup(&p, &space, seed, DEFAULT_RESTARTS)?.lower_bound;
                let norm = induced_norm(p.matrix(), &space, seed, DEFAULT_RESTARTS)?.lower_bound;
                let tol = if pe == 2.0 { 1e-10 } else { 0.02 };
                worst_ratio = worst_ratio.min(quad / norm);
                if (quad - norm).abs() > tol * norm {
                    bad.push((i, format!("sup {quad:.4} vs norm {norm:.4}")));
                }
                let psd = SymOperator::gram(&g);
                let quad = quadratic_sup(&psd, &space, seed, DEFAULT_RESTARTS)?.lower_bound;
                let norm = induced_norm(psd.matrix(), &space, seed, DEFAULT_RESTARTS)?.lower_bound;
                psd_worst = psd_worst.min(quad / norm);
            }
            let label = if pe == 2.0 {
                "(i) p = 2: sup |<Px,x>| = |P| to 1e-10".to_string()
            } else {
                format!("(i) p = {}: sup |<Px,x>| within 2% of |P|", LpSpace::new(1, pe)?.p)
            };
            out.push(check(
                label,
                bad.is_empty(),
                if bad.is_empty() {
                    format!("10/10 symmetric P, worst ratio {worst_ratio:.4}")
                } else {
                    format!("{}/10 outside, worst ratio {worst_ratio:.4}; {}", bad.len(), fails(&bad))
                },
            ));
            out.push(info(
                format!("(i) p = {} restricted to PSD P", LpSpace::new(1, pe)?.p),
                format!("worst ratio {psd_worst:.4}"),
            ));
        }
        let mut ls_bad = Vec::new();
        let mut ls_worst = f64::NEG_INFINITY;
        for &pe in &exps {
            for i in 0..5 {
                let n = rng.random_range(2..=8);
                let rank = rng.random_range(1..=n);
                let p = SymOperator::gram(&randn(rank, n, &mut rng));
                let r = check_ls_ii(&p, &LpSpace::new(n, pe)?, 10_000, seed.wrapping_add(i))?;
                ls_worst = ls_worst.max(r.max_violation / r.tolerance);
                if !r.passed() {
                    ls_bad.push((i as usize, format!("p = {pe}: {:.2e} > {:.2e}", r.max_violation, r.tolerance)));
                }
            }
        }
        out.push(check(
            "(ii) |Px|_q^2 <= |P| <Px,x>, 1e4 samples",
            ls_bad.is_empty(),
            if ls_bad.is_empty() {
                format!("20 (P, p) pairs, max violation / tol = {ls_worst:.2e}")
            } else {
                fails(&ls_bad)
            },
        ));
        let mut mono_bad = Vec::new();
        for i in 0..50 {
            let n = rng.random_range(2..=8);
            let pe = exps[i % exps.len()];
            let p = SymOperator::gram(&randn(n, n, &mut rng));
            let r = p.add(&SymOperator::gram(&randn(rng.random_range(1..=n), n, &mut rng)));
            let space = LpSpace::new(n, pe)?;
            let np = induced_norm(p.matrix(), &space, seed, DEFAULT_RESTARTS)?.lower_bound;
            let nr = induced_norm(r.matrix(), &space, seed, DEFAULT_RESTARTS)?.lower_bound;
            if np > nr * NORM_INFLATION {
                mono_bad.push((i, format!("p = {pe}: {np:.4} > {nr:.4}")));
            }
        }
        out.push(check(
            "(iii) 0 <= P <= R implies |P| <= |R| (2% slack)",
            mono_bad.is_empty(),
            if mono_bad.is_empty() { "50/50 pairs".to_string() } else { fails(&mono_bad) },
        ));
        Ok(out)
    }

    fn sqrt(&self) -> Result<Vec<Check>> {
        let cfg = SolverConfig::default();
        let mut out = Vec::new();
        for n in [1, 3, 8] {
            let id = SymOperator::identity(n);
            let detail = match solve_regularized_sqrt(&id, &id, 1.0, &cfg) {
                Ok(sol) => {
                    let res = sqrt_residual(&id, &id, 1.0, &sol.x);
                    let err = (sol.x.matrix() - Matrix::identity(n, n) * (2f64.sqrt() - 1.0)).amax();
                    (res <= 1e-10 && err <= 1e-10, format!("residual {res:.2e}, max |P - (sqrt 2 - 1) I| {err:.2e}"))
                }
                Err(e) => (false, e.to_string()),
            };
            out.push(check(format!("N = Q = I, n = {n}"), detail.0, detail.1));
        }
        let mut rng = self.rng(9);
        let mut bad = Vec::new();
        let mut worst_res = 0.0_f64;
        for i in 0..20 {
            let n = rng.random_range(1..=8);
            let nm = SymOperator::gram(&randn(rng.random_range(1..=n), n, &mut rng));
            let q = SymOperator::gram(&randn(rng.random_range(1..=n), n, &mut rng));
            let a = rng.random_range(0.1..10.0);
            match solve_regularized_sqrt(&nm, &q, a, &cfg) {
                Ok(sol) => {
                    let res = sqrt_residual(&nm, &q, a, &sol.x);
                    worst_res = worst_res.max(res);
                    if res > 1e-10 {
                        bad.push((i, format!("residual {res:.2e}")));
                    }
                }
                Err(e) => bad.push((i, e.to_string())),
            }
        }
        out.push(check(
            "20 random PSD (N, Q), start Q/(2a)",
            bad.is_empty(),
            if bad.is_empty() { format!("worst residual {worst_res:.2e}") } else { fails(&bad) },
        ));
        Ok(out)
    }

    fn dichotomy(&self) -> Result<Vec<Check>> {
        let s = |v: f64| Matrix::from_element(1, 1, v);
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 2.0]);
        let b = Matrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let good = match dichotomous_gain(&s(-1.0), &s(2.0), &b) {
            Ok(k) => {
                let err = (&a - &b * &k - Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0])).amax();
                check("A - BK = diag(-1, -1)", err <= 1e-12, format!("max deviation {err:.2e}"))
            }
            Err(e) => check("A - BK = diag(-1, -1)", false, e.to_string()),
        };
        let b2 = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let bad = match dichotomous_gain(&s(-1.0), &s(2.0), &b2) {
            Err(e @ Error::RangeConditionFailed { .. }) => check("B = (1, 0) refused", true, e.to_string()),
            other => check("B = (1, 0) refused", false, format!("{other:?}")),
        };
        Ok(vec![good, bad])
    }

    fn heat(&self) -> Result<Vec<Check>> {
        let n = 32;
        let c = heat_shift_for_abscissa(n, 1.0, 5.0);
        let (act, sen) = heat_default_nodes(n);
        let sys = heat_demo(n, c, 1.0, &act, &sen)?;
        let open = spectral_abscissa(sys.a())?.abscissa;
        let start = Instant::now();
        let run = self.solve(&sys, &SolverConfig::default());
        let secs = start.elapsed().as_secs_f64();
        let mut out = vec![info("open-loop abscissa", format!("{open:.6}"))];
        match run {
            Ok(run) => {
                let s = &run.solution;
                let rel = s.residual / residual_scale(sys.a(), sys.q_op().matrix(), s.p.matrix());
                out.push(check(
                    "closed-loop abscissa < 0",
                    s.closed_loop_abscissa < 0.0,
                    format!("{:.4}", s.closed_loop_abscissa),
                ));
                out.push(check("relative residual <= 1e-8", rel <= 1e-8, format!("{rel:.2e} after {} iterations", s.iterations)));
            }
            Err(e) => out.push(check("solve", false, e.to_string())),
        }
        out.push(check("runtime", secs < 5.0, format!("{secs:.3} s (limit 5 s)")));
        Ok(out)
    }
}
