use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::LyapunovMethod;

/// Tolerances and switches shared by the Newton solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverConfig {
    /// Stop when `|F(P_n)|_F <= rel_tol (1 + |C^T C|_F + |A|_F |P_n|_F)`.
    pub rel_tol: f64,
    /// Stop when `|P_n - P_(n+1)|_F <= step_tol |P_n|_F`.
    pub step_tol: f64,
    /// Monotonicity slack, relative to `1 + |P_1|_2`.
    pub mon_tol: f64,
    pub max_iter: usize,
    pub method: LyapunovMethod,
    /// Compare every iterate against the Hamiltonian oracle.
    pub oracle: bool,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            step_tol: 1e-12,
            mon_tol: 1e-8,
            max_iter: 60,
            method: LyapunovMethod::Schur,
            oracle: false,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("relTol", self.rel_tol),
            ("stepTol", self.step_tol),
            ("monTol", self.mon_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("maxIter must be at least 1".into()));
        }
        Ok(())
    }
}
