//! Norms and order on `R^n` with the `p`-norm, its dual carrying the
//! `q`-norm, `1/p + 1/q = 1`, and symmetric `P` viewed as maps `X -> X*`.
//!
//! Outside `p = 2` the induced norms are estimated by multi-start ascent. The
//! returned values are lower bounds attained by an explicit witness.

use std::fmt;

use nalgebra::SVD;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{is_psd, symmetric_eigen, ConeTolerances, Matrix, SymOperator, Vector};

pub const DEFAULT_RESTARTS: usize = 64;
const ASCENT_STEPS: usize = 200;
const STALL_TOL: f64 = 1e-12;
const MIN_STEP: f64 = 1.0 / 1024.0;
/// Inflation of estimated norms used as upper bounds.
pub const NORM_INFLATION: f64 = 1.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    /// `p = f64::INFINITY` maps to [`Exponent::Infinity`].
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidParameter(format!("exponent p = {p} must be >= 1")));
        }
        Ok(if p.is_infinite() {
            Exponent::Infinity
        } else {
            Exponent::Finite(p)
        })
    }

    pub fn dual(self) -> Self {
        match self {
            Exponent::Infinity => Exponent::Finite(1.0),
            Exponent::Finite(1.0) => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }

    pub fn is_two(self) -> bool {
        self == Exponent::Finite(2.0)
    }

    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    pub fn norm(self, x: &[f64]) -> f64 {
        let amax = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        match self {
            Exponent::Infinity => amax,
            _ if amax == 0.0 => 0.0,
            Exponent::Finite(1.0) => x.iter().map(|v| v.abs()).sum(),
            Exponent::Finite(2.0) => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Exponent::Finite(p) => {
                amax * x.iter().map(|v| (v.abs() / amax).powf(p)).sum::<f64>().powf(1.0 / p)
            }
        }
    }

    /// The unit vector `w` of the conjugate space with `<w, v> = |v|_self`.
    fn norming(self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let amax = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if amax == 0.0 {
            let mut e = vec![0.0; n];
            if n > 0 {
                e[0] = 1.0;
            }
            return e;
        }
        match self {
            Exponent::Infinity => {
                let k = (0..n).find(|&i| v[i].abs() == amax).unwrap_or(0);
                let mut e = vec![0.0; n];
                e[k] = v[k].signum();
                e
            }
            Exponent::Finite(1.0) => v.iter().map(|x| if *x == 0.0 { 0.0 } else { x.signum() }).collect(),
            Exponent::Finite(r) => {
                let w: Vec<f64> = v.iter().map(|x| x.signum() * (x.abs() / amax).powf(r - 1.0)).collect();
                let s = self.dual().norm(&w);
                w.into_iter().map(|x| x / s).collect()
            }
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

/// `X = (R^dim, |.|_p)` and `X* = (R^dim, |.|_q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LpSpace {
    pub dim: usize,
    pub p: Exponent,
}

impl LpSpace {
    pub fn new(dim: usize, p: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("space dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            p: Exponent::new(p)?,
        })
    }

    pub fn q(&self) -> Exponent {
        self.p.dual()
    }

    fn check(&self, m: &Matrix, what: &str) -> Result<()> {
        if m.shape() != (self.dim, self.dim) {
            return Err(Error::dims(what, format!("{0}x{0}", self.dim), format!("{}x{}", m.nrows(), m.ncols())));
        }
        Ok(())
    }
}

/// `(sum |x_i|^p)^(1/p)`, `max |x_i|` for `p = inf`.
pub fn lp_norm(x: &[f64], p: f64) -> Result<f64> {
    Ok(Exponent::new(p)?.norm(x))
}

/// A lower bound attained at `best_witness`, a unit vector of `X`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NormEstimate {
    pub lower_bound: f64,
    pub best_witness: Vec<f64>,
    pub restarts: usize,
}

fn unit(space: &LpSpace, x: Vec<f64>) -> Vec<f64> {
    let s = space.p.norm(&x);
    if s == 0.0 {
        return space.p.dual().norming(&x);
    }
    x.into_iter().map(|v| v / s).collect()
}

fn random_unit(space: &LpSpace, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let x: Vec<f64> = (0..space.dim).map(|_| StandardNormal.sample(rng)).collect();
    unit(space, x)
}

fn apply(m: &Matrix, x: &[f64]) -> Vec<f64> {
    (m * Vector::from_column_slice(x)).as_slice().to_vec()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn induced_value(p: &Matrix, space: &LpSpace, x: &[f64]) -> f64 {
    space.q().norm(&apply(p, x))
}

fn quadratic_value(p: &Matrix, x: &[f64]) -> f64 {
    dot(x, &apply(p, x)).abs()
}

/// Lower bound on `sup_{|x|_p = 1} |Px|_q`.
///
/// Exact at `p = 2` (largest singular value). Otherwise each restart runs the
/// ascent `z = J(Px)`, `x <- J(P^T z)` from a random start, which never
/// decreases `|Px|_q`.
pub fn induced_norm(p: &Matrix, space: &LpSpace, seed: u64, restarts: usize) -> Result<NormEstimate> {
    space.check(p, "induced_norm P")?;
    let restarts = restarts.max(1);
    if space.p.is_two() {
        let svd = SVD::try_new(p.clone(), false, true, f64::EPSILON, 100_000)
            .ok_or_else(|| Error::Eigensolver("induced 2-norm".into()))?;
        let v_t = svd.v_t.expect("right singular vectors requested");
        let k = svd.singular_values.imax();
        let w = unit(space, v_t.row(k).iter().copied().collect());
        return Ok(NormEstimate {
            lower_bound: induced_value(p, space, &w),
            best_witness: w,
            restarts: 0,
        });
    }
    let q = space.q();
    let pt = p.transpose();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let mut x = random_unit(space, &mut rng);
        let mut val = induced_value(p, space, &x);
        for _ in 0..ASCENT_STEPS {
            let z = q.norming(&apply(p, &x));
            let next = unit(space, q.norming(&apply(&pt, &z)));
            let next_val = induced_value(p, space, &next);
            let gain = next_val - val;
            if next_val >= val {
                x = next;
                val = next_val;
            }
            if gain <= STALL_TOL * val.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        if val > best.0 {
            best = (val, x);
        }
    }
    Ok(NormEstimate {
        lower_bound: best.0,
        best_witness: best.1,
        restarts,
    })
}

/// Lower bound on `sup_{|x|_p = 1} |x^T P x|`.
///
/// Exact at `p = 2` (largest eigenvalue modulus). Otherwise restarts ascend
/// `s x^T P x` for both signs `s` along segments towards `J(sPx)`, with
/// backtracking since the full step may overshoot when `sP` is indefinite.
pub fn quadratic_sup(p: &SymOperator, space: &LpSpace, seed: u64, restarts: usize) -> Result<NormEstimate> {
    let m = p.matrix();
    space.check(m, "quadratic_sup P")?;
    let restarts = restarts.max(1);
    if space.p.is_two() {
        let (values, vectors) = symmetric_eigen(m)?;
        let k = (0..values.len())
            .max_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()))
            .unwrap_or(0);
        let w = unit(space, vectors.column(k).iter().copied().collect());
        return Ok(NormEstimate {
            lower_bound: quadratic_value(m, &w),
            best_witness: w,
            restarts: 0,
        });
    }
    let q = space.q();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let start = random_unit(space, &mut rng);
        for sign in [1.0, -1.0] {
            let form = |x: &[f64]| sign * dot(x, &apply(m, x));
            let mut x = start.clone();
            let mut cur = form(&x);
            for _ in 0..ASCENT_STEPS {
                let g: Vec<f64> = apply(m, &x).into_iter().map(|v| sign * v).collect();
                let target = unit(space, q.norming(&g));
                let mut tau = 1.0;
                let mut accepted = None;
                while tau >= MIN_STEP {
                    let y: Vec<f64> = x.iter().zip(&target).map(|(a, b)| (1.0 - tau) * a + tau * b).collect();
                    let y = unit(space, y);
                    let fy = form(&y);
                    if fy > cur {
                        accepted = Some((y, fy));
                        break;
                    }
                    tau *= 0.5;
                }
                let Some((y, fy)) = accepted else { break };
                let gain = fy - cur;
                x = y;
                cur = fy;
                if gain <= STALL_TOL * cur.abs().max(1.0) {
                    break;
                }
            }
            let val = quadratic_value(m, &x);
            if val > best.0 {
                best = (val, x);
            }
        }
    }
    Ok(NormEstimate {
        lower_bound: best.0,
        best_witness: best.1,
        restarts,
    })
}

/// Result of sampling `|Px|_q^2 - |P| <Px, x>` over unit `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LsReport {
    pub max_violation: f64,
    pub tolerance: f64,
    /// Upper bound on `|P|` used: exact at `p = 2`, inflated estimate otherwise.
    pub norm_bound: f64,
    pub samples: usize,
}

impl LsReport {
    pub fn passed(&self) -> bool {
        self.max_violation <= self.tolerance
    }
}

/// Samples `|Px|_q^2 <= |P| <Px, x>` for PSD `P`.
pub fn check_ls_ii(p: &SymOperator, space: &LpSpace, samples: usize, seed: u64) -> Result<LsReport> {
    let m = p.matrix();
    space.check(m, "check_ls_ii P")?;
    if !is_psd(p, &ConeTolerances::default())? {
        return Err(Error::NotPsd {
            min_eigenvalue: p.min_eigenvalue()?,
        });
    }
    let norm_bound = if space.p.is_two() {
        p.spectral_norm()?
    } else {
        NORM_INFLATION * induced_norm(m, space, seed, DEFAULT_RESTARTS)?.lower_bound
    };
    let q = space.q();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_violation = f64::NEG_INFINITY;
    for _ in 0..samples {
        let x = random_unit(space, &mut rng);
        let px = apply(m, &x);
        let v = q.norm(&px).powi(2) - norm_bound * dot(&px, &x);
        max_violation = max_violation.max(v);
    }
    Ok(LsReport {
        max_violation,
        tolerance: 1e-10 * (1.0 + norm_bound.powi(3)),
        norm_bound,
        samples,
    })
}
