use crate::error::{Error, Result};
use crate::operator::Matrix;
use crate::riccati::StateSpaceSystem;

/// Semi-discretized `u_t = nu u_xx + c u` on `(0, 1)` with Dirichlet ends:
/// `A = nu/h^2 tridiag(1, -2, 1) + c I`, `h = 1/(n+1)`. `B` and `C` are unit
/// columns and rows at the (0-based) actuator and sensor nodes.
pub fn heat_demo(n: usize, c: f64, nu: f64, actuators: &[usize], sensors: &[usize]) -> Result<StateSpaceSystem> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("heat demo needs n >= 3, got {n}")));
    }
    if !(nu > 0.0 && nu.is_finite() && c.is_finite()) {
        return Err(Error::InvalidParameter("heat demo needs nu > 0 and finite c".into()));
    }
    for (what, idx) in [("actuator", actuators), ("sensor", sensors)] {
        if let Some(&i) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidParameter(format!("{what} index {i} out of range 0..{n}")));
        }
    }
    let h = 1.0 / (n as f64 + 1.0);
    let d = nu / (h * h);
    let a = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            -2.0 * d + c
        } else if i.abs_diff(j) == 1 {
            d
        } else {
            0.0
        }
    });
    let mut b = Matrix::zeros(n, actuators.len());
    for (k, &i) in actuators.iter().enumerate() {
        b[(i, k)] = 1.0;
    }
    let mut cm = Matrix::zeros(sensors.len(), n);
    for (k, &i) in sensors.iter().enumerate() {
        cm[(k, i)] = 1.0;
    }
    StateSpaceSystem::new(a, b, cm)
}

/// Largest eigenvalue of the diffusion part, `nu/h^2 (2 cos(pi h) - 2)`.
pub fn heat_top_eigenvalue(n: usize, nu: f64) -> f64 {
    let h = 1.0 / (n as f64 + 1.0);
    nu / (h * h) * (2.0 * (std::f64::consts::PI * h).cos() - 2.0)
}

/// Reaction coefficient `c` giving open-loop abscissa `target`.
pub fn heat_shift_for_abscissa(n: usize, nu: f64, target: f64) -> f64 {
    target - heat_top_eigenvalue(n, nu)
}

/// Default nodes: one actuator at `n/2`, one sensor at `n/3`.
pub fn heat_default_nodes(n: usize) -> (Vec<usize>, Vec<usize>) {
    (vec![n / 2], vec![n / 3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::hautus_stabilizable;
    use crate::semigroup::spectral_abscissa;
    use approx::assert_relative_eq;

    #[test]
    fn stable_without_reaction() {
        let sys = heat_demo(3, 0.0, 1.0, &[1], &[0]).unwrap();
        let r = spectral_abscissa(sys.a()).unwrap();
        // (1/h^2)(-2 + 2 cos(pi/4)) with h = 1/4
        assert_relative_eq!(r.abscissa, 16.0 * (-2.0 + 2f64.sqrt()), max_relative = 1e-12);
        assert!(r.is_stable);
    }

    #[test]
    fn reaction_destabilizes() {
        let c = heat_shift_for_abscissa(3, 1.0, 5.0);
        let sys = heat_demo(3, c, 1.0, &[1], &[0]).unwrap();
        let r = spectral_abscissa(sys.a()).unwrap();
        assert_relative_eq!(r.abscissa, 5.0, max_relative = 1e-10);
        assert!(!r.is_stable);
    }

    #[test]
    fn full_actuation_is_stabilizable() {
        let sys = heat_demo(5, 100.0, 1.0, &[0, 1, 2, 3, 4], &[2]).unwrap();
        assert!(hautus_stabilizable(sys.a(), sys.b()).unwrap());
        assert!(heat_demo(5, 0.0, 1.0, &[5], &[0]).is_err());
        assert!(heat_demo(2, 0.0, 1.0, &[0], &[0]).is_err());
    }
}
