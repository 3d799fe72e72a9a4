use thiserror::Error;

/// Errors raised by the analysis kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("right-hand side left its domain at t = {t}: {reason}")]
    DomainViolation { t: f64, reason: String },

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("perturbed trajectory does not start on the reference at tau = {tau} (gap {gap:e})")]
    InvalidRebase { tau: f64, gap: f64 },

    #[error("Gram determinant path is not positive semidefinite at t = {t} (value {value:e})")]
    NotPsd { t: f64, value: f64 },

    #[error("zero order at tau = {tau} is not an integer (fitted slope {slope})")]
    OrderIndeterminate { tau: f64, slope: f64 },

    #[error("order-fit window around tau = {tau} is too small: samples underflow")]
    WindowTooSmall { tau: f64 },

    #[error("system is outside the admissible class: {0}")]
    ClassMembershipFailure(String),

    #[error("perturbation vanishes identically on [{tau}, {theta}]")]
    DegeneratePerturbation { tau: f64, theta: f64 },

    #[error("sensitivity annihilates the perturbation on [{tau}, {theta}]")]
    DegenerateDirection { tau: f64, theta: f64 },

    #[error("interval [{tau}, {theta}] does not match any admissible endpoint pattern")]
    PartitionInconsistency { tau: f64, theta: f64 },

    #[error("rank drop at c = {c} has a {kernel_dim}-dimensional kernel")]
    NotInClassH { c: f64, kernel_dim: usize },

    #[error("direction violates the vanishing-rate bound near the zero: {0}")]
    InadmissibleDirection(String),

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown identifier `{name}` at line {line}, column {column}")]
    UnknownIdentifier {
        name: String,
        line: usize,
        column: usize,
    },

    #[error("exponent must be an integer at line {line}, column {column}")]
    NonIntegerExponent { line: usize, column: usize },
}

/// Coarse grouping used by front ends to map errors onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad configuration, malformed expression, violated precondition.
    Input,
    /// The system or perturbation falls outside the analysed classes.
    Analysis,
    /// The numerics broke down.
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidInput(_)
            | Error::Syntax { .. }
            | Error::UnknownIdentifier { .. }
            | Error::NonIntegerExponent { .. }
            | Error::InvalidRebase { .. } => ErrorClass::Input,
            Error::IntegrationFailure { .. }
            | Error::DomainViolation { .. }
            | Error::NumericalDegeneracy(_)
            | Error::WindowTooSmall { .. } => ErrorClass::Numerical,
            Error::NotPsd { .. }
            | Error::OrderIndeterminate { .. }
            | Error::ClassMembershipFailure(_)
            | Error::DegeneratePerturbation { .. }
            | Error::DegenerateDirection { .. }
            | Error::PartitionInconsistency { .. }
            | Error::NotInClassH { .. }
            | Error::InadmissibleDirection(_) => ErrorClass::Analysis,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
