use thiserror::Error;

/// Errors raised by the certificate, witness and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {what} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("{0} must have strictly positive entries")]
    NotPositive(&'static str),

    #[error("eigensolver did not converge on a {0}x{0} matrix")]
    EigenFailure(usize),

    #[error("linear system is singular")]
    Singular,

    #[error("no positive vector: {0}")]
    NoPositiveVector(String),

    #[error("diagonal Lyapunov construction failed verification (lambda_max = {lambda_max:e})")]
    LyapunovVerification { lambda_max: f64 },

    #[error("block matrix not negative definite (lambda_max = {lambda_max:e})")]
    NotNegativeDefinite { lambda_max: f64 },

    #[error(
        "block test and Riccati-form test disagree (block lambda_max = {block:e}, riccati lambda_max = {riccati:e})"
    )]
    SchurInconsistency { block: f64, riccati: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("synthesized pair failed verification: {0}")]
    VerificationFailure(String),

    #[error("pair is neither lower nor upper triangular")]
    NotTriangular,

    #[error("pair satisfies the triangular stability criterion; no witness index exists")]
    NoViolatingIndex,

    #[error("invalid witness: {0}")]
    InvalidWitness(String),

    #[error("proposition (iv) index search found no index")]
    NoIndexFound,

    #[error("search exhausted its budget (best objective {best:e})")]
    NotFound { best: f64 },

    #[error("invalid interaction function: {0}")]
    InvalidFunction(String),

    #[error("componentwise inversion failed for species {index}: f is bounded below {target:e}")]
    InversionFailure { index: usize, target: f64 },

    #[error("invalid step: {0}")]
    InvalidStep(String),

    #[error("step size collapsed at t = {t:e} (state {state:?})")]
    StepCollapse { t: f64, state: Vec<f64> },

    #[error("certificate rejected for this model: {0}")]
    CertificateRejected(String),
}

pub type Result<T> = std::result::Result<T, Error>;
