//! From a validated problem file to a result file.

use serde::Serialize;

use crate::concave::{solve_regularized_sqrt, sqrt_residual};
use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::io::{Mode, ProblemFile, ResultFile};
use crate::lyapunov::{lyapunov_residual, residual_scale, solve_lyapunov, wonham_equivalence, WonhamReport};
use crate::operator::{ConeTolerances, Matrix, SymOperator};
use crate::riccati::{solve_riccati, StateSpaceSystem};
use crate::semigroup::{datko_defaults, datko_integral, spectral_abscissa};

fn field(m: &Option<Matrix>, name: &str) -> Result<Matrix> {
    m.clone().ok_or_else(|| Error::MissingField(name.into()))
}

pub fn system_of(problem: &ProblemFile) -> Result<StateSpaceSystem> {
    StateSpaceSystem::new(field(&problem.a, "A")?, field(&problem.b, "B")?, field(&problem.c, "C")?)
}

/// Solves the problem in its declared mode.
pub fn solve_problem(problem: &ProblemFile, cfg: &SolverConfig) -> Result<ResultFile> {
    cfg.validate()?;
    let base = |p: Matrix| ResultFile {
        name: problem.name.clone(),
        mode: problem.mode,
        p,
        k: None,
        residual: 0.0,
        relative_residual: 0.0,
        iterations: 0,
        kappa: None,
        closed_loop_abscissa: 0.0,
        trace: Vec::new(),
        config: *cfg,
    };
    match problem.mode {
        Mode::Riccati => {
            let sys = system_of(problem)?;
            let run = solve_riccati(&sys, cfg, problem.k0.as_ref())?;
            let s = run.solution;
            let scale = residual_scale(sys.a(), sys.q_op().matrix(), s.p.matrix());
            Ok(ResultFile {
                k: Some(s.k),
                residual: s.residual,
                relative_residual: s.residual / scale,
                iterations: s.iterations,
                kappa: s.kappa,
                closed_loop_abscissa: s.closed_loop_abscissa,
                trace: run.trace.rows,
                ..base(s.p.into_matrix())
            })
        }
        Mode::Lyapunov => {
            let a = field(&problem.a, "A")?;
            let q = match (&problem.q, &problem.c) {
                (Some(q), _) => SymOperator::symmetrized(q),
                (None, Some(c)) => SymOperator::gram(c),
                (None, None) => return Err(Error::MissingField("C".into())),
            };
            let p = solve_lyapunov(&a, &q, cfg.method)?;
            let residual = lyapunov_residual(&a, q.matrix(), p.matrix());
            Ok(ResultFile {
                residual,
                relative_residual: residual / residual_scale(&a, q.matrix(), p.matrix()),
                closed_loop_abscissa: spectral_abscissa(&a)?.abscissa,
                ..base(p.into_matrix())
            })
        }
        Mode::Sqrt => {
            let a = problem.reg.ok_or_else(|| Error::MissingField("a".into()))?;
            let n = SymOperator::symmetrized(&field(&problem.n_mat, "N")?);
            let q = SymOperator::symmetrized(&field(&problem.q, "Q")?);
            let sol = solve_regularized_sqrt(&n, &q, a, cfg)?;
            let residual = sqrt_residual(&n, &q, a, &sol.x);
            let dim = q.dim();
            let closed = -Matrix::identity(dim, dim) * a - n.matrix() * sol.x.matrix();
            Ok(ResultFile {
                residual,
                relative_residual: residual / (1.0 + q.matrix().norm()),
                iterations: sol.iterations,
                closed_loop_abscissa: spectral_abscissa(&closed)?.abscissa,
                trace: sol.trace.rows,
                ..base(sol.x.into_matrix())
            })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StabilityCheck {
    pub abscissa: f64,
    pub is_stable: bool,
    /// Datko integral finite for every basis vector.
    pub datko_converges: bool,
    pub datko_values: Vec<Option<f64>>,
    pub wonham: WonhamReport,
}

/// Abscissa, Datko integrals along the basis and the three-way Lyapunov
/// equivalence with `C` from the file (identity when absent).
pub fn stability_check(problem: &ProblemFile) -> Result<StabilityCheck> {
    let a = field(&problem.a, "A")?;
    let n = a.nrows();
    let c = problem.c.clone().unwrap_or_else(|| Matrix::identity(n, n));
    let report = spectral_abscissa(&a)?;
    let (t_max, step) = datko_defaults(&a)?;
    let mut datko_values = Vec::with_capacity(n);
    let mut datko_converges = true;
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let d = datko_integral(&a, &e, t_max, step)?;
        datko_converges &= d.converges();
        datko_values.push(d.converges().then_some(d.value + d.tail_bound));
    }
    Ok(StabilityCheck {
        abscissa: report.abscissa,
        is_stable: report.is_stable,
        datko_converges,
        datko_values,
        wonham: wonham_equivalence(&a, &c, &ConeTolerances::default())?,
    })
}
