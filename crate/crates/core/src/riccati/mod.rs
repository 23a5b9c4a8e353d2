//! Continuous-time algebraic Riccati equation
//! `A^T P + P A - P B B^T P + C^T C = 0` and its Newton-Kleinman solution.

mod hamiltonian;
mod hautus;
mod newton;
mod stabilize;

pub use hamiltonian::hamiltonian_oracle;
pub use hautus::{
    detectability_margin, hautus_detectable, hautus_stabilizable, stabilizability_margin,
};
pub use newton::{
    kappa_estimate, newton_kleinman, newton_kleinman_with, quadratic_convergence_check,
    solve_riccati, solve_riccati_with, IterationTrace, Mutation, QuadraticReport, RiccatiRun, RiccatiSolution,
    TraceRow, KAPPA_MAX_DIM,
};
pub use stabilize::{dichotomous_gain, initial_guess, stabilize, stabilizing_gains};

use crate::error::{Error, Result};
use crate::operator::{ensure_finite, ensure_square, Matrix, SymOperator};

/// The triple `(A, B, C)` of `x' = Ax + Bu, y = Cx`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceSystem {
    a: Matrix,
    b: Matrix,
    c: Matrix,
}

impl StateSpaceSystem {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        ensure_square(&a, "A")?;
        let n = a.nrows();
        if b.nrows() != n {
            return Err(Error::dims("B rows", n, b.nrows()));
        }
        if c.ncols() != n {
            return Err(Error::dims("C columns", n, c.ncols()));
        }
        ensure_finite(&a, "A")?;
        ensure_finite(&b, "B")?;
        ensure_finite(&c, "C")?;
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Output dimension.
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    /// `N = B B^T`.
    pub fn n_op(&self) -> SymOperator {
        SymOperator::symmetrized(&(&self.b * self.b.transpose()))
    }

    /// `Q = C^T C`.
    pub fn q_op(&self) -> SymOperator {
        SymOperator::gram(&self.c)
    }
}

/// `A^T P + P A - P N P + Q` for symmetric `N`, `Q`.
pub fn riccati_map(a: &Matrix, n: &Matrix, q: &Matrix, p: &Matrix) -> Matrix {
    a.transpose() * p + p * a - p * n * p + q
}

/// `|A^T P + P A - P B B^T P + C^T C|_F`.
pub fn riccati_residual(sys: &StateSpaceSystem, p: &SymOperator) -> Result<f64> {
    if p.dim() != sys.n() {
        return Err(Error::dims("riccati_residual", sys.n(), p.dim()));
    }
    Ok(riccati_map(sys.a(), sys.n_op().matrix(), sys.q_op().matrix(), p.matrix()).norm())
}
