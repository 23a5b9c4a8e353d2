use crate::error::{Error, Result};
use crate::linalg::{solve_dense, RealSchur};
use crate::operator::{is_psd, singular_values, ConeTolerances, Matrix, SymOperator};

use super::hautus::{hautus_detectable, hautus_stabilizable};
use super::{riccati_map, StateSpaceSystem};

/// Stabilizing solution from the stable invariant subspace of
/// `H = [[A, -BB^T], [-C^T C, -A^T]]`, independent of the Newton iteration.
///
/// The ordered real Schur basis `[U1; U2]` of the `n` stable eigenvalues
/// gives `P = U2 U1^{-1}`, which is then checked for positivity and a
/// relative residual of `1e-8`.
pub fn hamiltonian_oracle(sys: &StateSpaceSystem) -> Result<SymOperator> {
    if !hautus_stabilizable(sys.a(), sys.b())? {
        return Err(Error::NotStabilizable);
    }
    if !hautus_detectable(sys.c(), sys.a())? {
        return Err(Error::NotDetectable);
    }
    let n = sys.n();
    if n == 0 {
        return Ok(SymOperator::zeros(0));
    }
    let a = sys.a();
    let nm = sys.n_op();
    let qm = sys.q_op();

    let mut h = Matrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-nm.matrix()));
    h.view_mut((n, 0), (n, n)).copy_from(&(-qm.matrix()));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let mut schur = RealSchur::new(&h)?;
    let stable = schur.reorder(|z| z.re < 0.0)?;
    if stable != n {
        return Err(Error::OracleCheckFailed(format!(
            "Hamiltonian has {stable} stable eigenvalues, expected {n}"
        )));
    }
    let u1 = schur.q.view((0, 0), (n, n)).into_owned();
    let u2 = schur.q.view((n, 0), (n, n)).into_owned();
    let sv = singular_values(&u1)?;
    let rcond = sv.last().copied().unwrap_or(0.0) / sv[0].max(f64::MIN_POSITIVE);
    if !(rcond > 1e-12) {
        return Err(Error::SubspaceSingular { rcond });
    }
    // P U1 = U2  <=>  U1^T P^T = U2^T
    let pt = solve_dense(&u1.transpose(), &u2.transpose(), "Hamiltonian subspace")?;
    let p = SymOperator::symmetrized(&pt.transpose());

    if !is_psd(&p, &ConeTolerances::default())? {
        return Err(Error::OracleCheckFailed(format!(
            "oracle solution not PSD (min eigenvalue {:.3e})",
            p.min_eigenvalue()?
        )));
    }
    let residual = riccati_map(a, nm.matrix(), qm.matrix(), p.matrix()).norm();
    let pn = p.matrix().norm();
    let scale = 1.0 + qm.matrix().norm() + 2.0 * a.norm() * pn + nm.matrix().norm() * pn * pn;
    if residual > 1e-8 * scale {
        return Err(Error::OracleCheckFailed(format!(
            "oracle residual {residual:.3e} exceeds {:.3e}",
            1e-8 * scale
        )));
    }
    Ok(p)
}
