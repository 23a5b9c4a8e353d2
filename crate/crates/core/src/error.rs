use thiserror::Error;

/// Errors produced by the solvers, the certificates and the problem loader.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: String,
        found: String,
    },
    #[error("non-finite entry in {0}")]
    NonFinite(String),
    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("eigensolver failed to converge: {0}")]
    Eigensolver(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("matrix exponential overflowed (t*|A| = {0:.3e})")]
    ExpmOverflow(f64),
    #[error("SpectrumDegenerate: min |l_i + l_j| = {min_sum:.3e} below threshold {threshold:.3e}")]
    SpectrumDegenerate { min_sum: f64, threshold: f64 },
    #[error("residual check failed in {context}: {residual:.3e} > {bound:.3e}")]
    ResidualTooLarge {
        context: &'static str,
        residual: f64,
        bound: f64,
    },
    #[error("singular linear system in {0}")]
    Singular(String),
    #[error("problem too large for {method}: n = {n}, limit {limit}")]
    TooLarge {
        method: &'static str,
        n: usize,
        limit: usize,
    },
    #[error("NotStabilizable: (A, B) fails the Hautus test")]
    NotStabilizable,
    #[error("NotDetectable: (C, A) fails the Hautus test")]
    NotDetectable,
    #[error("StabilizationFailed: closed-loop abscissa {abscissa:.3e} after every construction")]
    StabilizationFailed { abscissa: f64 },
    #[error("InitialGuessNotStabilizing: abscissa of A - BB'P0 is {abscissa:.3e}")]
    InitialGuessNotStabilizing { abscissa: f64 },
    #[error("IterateNotStabilizing: step {step}, closed-loop abscissa {abscissa:.3e}")]
    IterateNotStabilizing { step: usize, abscissa: f64 },
    #[error("MonotonicityViolated: step {step}, min eigenvalue of P_n - P_(n+1) is {gap:.3e}")]
    MonotonicityViolated { step: usize, gap: f64 },
    #[error("MaxIterExceeded: {iterations} iterations, residual {residual:.3e}")]
    MaxIterExceeded { iterations: usize, residual: f64 },
    #[error("AsymmetricIterate: step {step}, relative asymmetry {asymmetry:.3e}")]
    AsymmetricIterate { step: usize, asymmetry: f64 },
    #[error("RangeConditionFailed: least-squares residual {residual:.3e} exceeds {threshold:.3e}")]
    RangeConditionFailed { residual: f64, threshold: f64 },
    #[error("LinearizationUnstable: linearization abscissa {abscissa:.3e}")]
    LinearizationUnstable { abscissa: f64 },
    #[error("ConeViolation: iterate min eigenvalue {min_eigenvalue:.3e}")]
    ConeViolation { min_eigenvalue: f64 },
    #[error("NonPositiveA: regularization parameter a = {0} must be positive")]
    NonPositiveA(f64),
    #[error("SubspaceSingular: stable invariant subspace block U1 is singular (rcond {rcond:.3e})")]
    SubspaceSingular { rcond: f64 },
    #[error("OracleCheckFailed: {0}")]
    OracleCheckFailed(String),
    #[error("ParseError: {0}")]
    Parse(String),
    #[error("MissingField: \"{0}\"")]
    MissingField(String),
    #[error("DimensionMismatch: field \"{field}\": {detail}")]
    FieldDimension { field: String, detail: String },
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by malformed input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse(_) | Error::MissingField(_) | Error::FieldDimension { .. } | Error::Io(_)
        )
    }

    pub(crate) fn dims(context: &str, expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            context: context.to_string(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
