//! The state semigroup `T(t) = exp(tA)` and the Lyapunov semigroup
//! `P -> T(t)^T P T(t)` it induces, with stability diagnostics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, solve_dense};
use crate::lyapunov::{solve_lyapunov, LyapunovMethod};
use crate::operator::{ensure_finite, ensure_square, spectral_norm, Matrix, SymOperator, Vector};

/// `A` as the generator of `T(t) = exp(tA)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupGenerator {
    a: Matrix,
}

impl SemigroupGenerator {
    pub fn new(a: Matrix) -> Result<Self> {
        ensure_square(&a, "generator")?;
        ensure_finite(&a, "generator")?;
        Ok(Self { a })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn at(&self, t: f64) -> Result<Matrix> {
        expm(&self.a, t)
    }

    pub fn stability(&self) -> Result<StabilityReport> {
        spectral_abscissa(&self.a)
    }
}

// Scaling-and-squaring thresholds and Pade coefficients.
const THETA: [(usize, f64); 4] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
];
const THETA_13: f64 = 5.371_920_351_148_152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn one_norm(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(tA)` by scaling and squaring with a diagonal Pade approximant.
pub fn expm(a: &Matrix, t: f64) -> Result<Matrix> {
    ensure_square(a, "expm")?;
    ensure_finite(a, "expm")?;
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("expm time {t} is not finite")));
    }
    let n = a.nrows();
    if t == 0.0 || n == 0 {
        return Ok(Matrix::identity(n, n));
    }
    let at = a * t;
    let norm = one_norm(&at);
    if !norm.is_finite() {
        return Err(Error::ExpmOverflow(norm));
    }
    let ident = Matrix::identity(n, n);

    let (u, v, squarings) = if let Some(&(m, _)) = THETA.iter().find(|(_, th)| norm <= *th) {
        let b: &[f64] = match m {
            3 => &B3,
            5 => &B5,
            7 => &B7,
            _ => &B9,
        };
        let a2 = &at * &at;
        let mut powers = vec![ident.clone()];
        for k in 1..=(m / 2) {
            powers.push(&powers[k - 1] * &a2);
        }
        let mut odd = Matrix::zeros(n, n);
        let mut even = Matrix::zeros(n, n);
        for k in 0..=(m / 2) {
            odd += &powers[k] * b[2 * k + 1];
            even += &powers[k] * b[2 * k];
        }
        (&at * odd, even, 0u32)
    } else {
        let s = (norm / THETA_13).log2().ceil().max(0.0) as u32;
        if s > 1000 {
            return Err(Error::ExpmOverflow(norm));
        }
        let x = &at / 2f64.powi(s as i32);
        let b = &B13;
        let x2 = &x * &x;
        let x4 = &x2 * &x2;
        let x6 = &x4 * &x2;
        let u_inner = &x6 * (&x6 * b[13] + &x4 * b[11] + &x2 * b[9])
            + &x6 * b[7]
            + &x4 * b[5]
            + &x2 * b[3]
            + &ident * b[1];
        let u = &x * u_inner;
        let v = &x6 * (&x6 * b[12] + &x4 * b[10] + &x2 * b[8])
            + &x6 * b[6]
            + &x4 * b[4]
            + &x2 * b[2]
            + &ident * b[0];
        (u, v, s)
    };

    let mut r = solve_dense(&(&v - &u), &(&v + &u), "Pade denominator")
        .map_err(|_| Error::ExpmOverflow(norm))?;
    for _ in 0..squarings {
        r = &r * &r;
        if !r.iter().all(|x| x.is_finite()) {
            return Err(Error::ExpmOverflow(norm));
        }
    }
    if !r.iter().all(|x| x.is_finite()) {
        return Err(Error::ExpmOverflow(norm));
    }
    Ok(r)
}

/// Spectral abscissa and the exponential-stability decision it implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    /// `max Re(lambda)` over the spectrum, in 1/time.
    pub abscissa: f64,
    pub is_stable: bool,
    /// Stability requires `abscissa < -margin`.
    pub margin: f64,
}

/// Default relative margin: marginal spectra count as unstable.
pub fn stability_margin(a: &Matrix) -> Result<f64> {
    Ok(1e-9 * spectral_norm(a)?.max(1.0))
}

pub fn spectral_abscissa(a: &Matrix) -> Result<StabilityReport> {
    ensure_square(a, "spectral_abscissa")?;
    ensure_finite(a, "spectral_abscissa")?;
    let margin = stability_margin(a)?;
    spectral_abscissa_with_margin(a, margin)
}

pub fn spectral_abscissa_with_margin(a: &Matrix, margin: f64) -> Result<StabilityReport> {
    let abscissa = eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(StabilityReport {
        abscissa,
        is_stable: abscissa < -margin,
        margin,
    })
}

/// `T(t)^T P T(t)`, symmetrized.
pub fn lyapunov_semigroup_apply(a: &Matrix, p: &SymOperator, t: f64) -> Result<SymOperator> {
    ensure_square(a, "lyapunov_semigroup_apply")?;
    if a.nrows() != p.dim() {
        return Err(Error::dims("lyapunov_semigroup_apply", a.nrows(), p.dim()));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Lyapunov semigroup time must be nonnegative, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(p.clone());
    }
    let e = expm(a, t)?;
    Ok(SymOperator::symmetrized(&(e.transpose() * p.matrix() * e)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatkoIntegral {
    /// Simpson approximation of the integral of `|exp(tA)x|^2` over `[0, t_max]`.
    pub value: f64,
    /// Integral over `[t_max, inf)`; infinite when `A` is not exponentially stable.
    pub tail_bound: f64,
}

impl DatkoIntegral {
    pub fn converges(&self) -> bool {
        self.tail_bound.is_finite() && self.value.is_finite()
    }
}

/// Datko functional of a single trajectory.
///
/// The tail beyond `t_max` is evaluated as `y^T W y` with `y = x(t_max)` and
/// `A^T W + W A = -I`, the exact remaining energy of a stable trajectory.
pub fn datko_integral(a: &Matrix, x: &[f64], t_max: f64, quad_step: f64) -> Result<DatkoIntegral> {
    ensure_square(a, "datko_integral")?;
    let n = a.nrows();
    if x.len() != n {
        return Err(Error::dims("datko_integral", n, x.len()));
    }
    if !(t_max > 0.0 && quad_step > 0.0) {
        return Err(Error::InvalidParameter(
            "t_max and quad_step must be positive".into(),
        ));
    }
    let half_steps = (t_max / (2.0 * quad_step)).ceil().max(1.0) as usize;
    let steps = 2 * half_steps;
    let h = t_max / steps as f64;
    let prop = expm(a, h)?;
    let mut y = Vector::from_column_slice(x);
    let mut sum = y.norm_squared();
    for k in 1..=steps {
        y = &prop * y;
        let w = if k == steps {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * y.norm_squared();
    }
    let value = sum * h / 3.0;

    let report = spectral_abscissa(a)?;
    let tail_bound = if !report.is_stable {
        f64::INFINITY
    } else if y.norm() == 0.0 {
        0.0
    } else {
        let w = solve_lyapunov(a, &SymOperator::identity(n), LyapunovMethod::Schur)?;
        (y.transpose() * w.matrix() * &y)[(0, 0)].max(0.0)
    };
    Ok(DatkoIntegral { value, tail_bound })
}

/// Horizon and step of the default Datko evaluation:
/// `t_max = 50/|abscissa|` when stable (50 otherwise), `|A|_2 * step <= 0.1`.
pub fn datko_defaults(a: &Matrix) -> Result<(f64, f64)> {
    let report = spectral_abscissa(a)?;
    let t_max = if report.is_stable {
        50.0 / report.abscissa.abs()
    } else {
        50.0
    };
    let norm = spectral_norm(a)?;
    let step = if norm > 0.0 { 0.1 / norm } else { 0.1 };
    Ok((t_max, step.min(t_max / 2.0)))
}

/// Counts from [`l2_detector_sample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct L2DetectorReport {
    pub consistent: usize,
    pub violating: usize,
    pub inconclusive: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Growth {
    Finite,
    Divergent,
    Unknown,
}

const RATE_BAND: f64 = 1e-3;
const DETECTOR_SAMPLES: usize = 600;

fn fit_rate(times: &[f64], logs: &[f64]) -> f64 {
    let n = times.len() as f64;
    let mt = times.iter().sum::<f64>() / n;
    let ml = logs.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, l) in times.iter().zip(logs) {
        num += (t - mt) * (l - ml);
        den += (t - mt) * (t - mt);
    }
    num / den
}

fn classify(rate: f64) -> Growth {
    if rate < -RATE_BAND {
        Growth::Finite
    } else if rate > RATE_BAND {
        Growth::Divergent
    } else {
        Growth::Unknown
    }
}

/// Sampled check of L2 detectability: for random initial states, tests
/// "observed energy finite => state energy finite" by the exponential rate
/// fitted to the last third of each trajectory.
pub fn l2_detector_sample(
    c: &Matrix,
    a: &Matrix,
    trials: usize,
    seed: u64,
    t_max: f64,
) -> Result<L2DetectorReport> {
    ensure_square(a, "l2_detector_sample")?;
    let n = a.nrows();
    if c.ncols() != n {
        return Err(Error::dims("l2_detector_sample C columns", n, c.ncols()));
    }
    if !(t_max > 0.0) {
        return Err(Error::InvalidParameter("t_max must be positive".into()));
    }
    let dt = t_max / DETECTOR_SAMPLES as f64;
    let prop = expm(a, dt)?;
    let c_norm = c.norm();
    let mut report = L2DetectorReport::default();
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
        let mut y = Vector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let mut log_scale = 0.0;
        let start = 2 * DETECTOR_SAMPLES / 3;
        let mut times = Vec::new();
        let mut state_logs = Vec::new();
        let mut output_logs = Vec::new();
        let mut output_vanishes = true;
        for k in 0..=DETECTOR_SAMPLES {
            if k > 0 {
                y = &prop * y;
            }
            let norm = y.norm();
            if norm == 0.0 {
                break;
            }
            if !(1e-100..=1e100).contains(&norm) {
                log_scale += norm.ln();
                y /= norm;
            }
            if k >= start {
                let yn = y.norm();
                let out = (c * &y).norm();
                times.push(k as f64 * dt);
                state_logs.push(log_scale + yn.ln());
                if out > 1e-13 * c_norm * yn {
                    output_vanishes = false;
                }
                output_logs.push(log_scale + out.max(f64::MIN_POSITIVE).ln());
            }
        }
        let state = if times.len() < 2 {
            Growth::Finite
        } else {
            classify(fit_rate(&times, &state_logs))
        };
        let observed = if output_vanishes || times.len() < 2 {
            Growth::Finite
        } else {
            classify(fit_rate(&times, &output_logs))
        };
        match (observed, state) {
            (Growth::Divergent, _) | (Growth::Finite, Growth::Finite) => report.consistent += 1,
            (Growth::Finite, Growth::Divergent) => report.violating += 1,
            _ => report.inconclusive += 1,
        }
    }
    Ok(report)
}
