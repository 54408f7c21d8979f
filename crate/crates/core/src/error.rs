use thiserror::Error;

use crate::linearize::GFailure;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NepvError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("denominator s_{index}^T x is numerically zero (|s^T x| = {value:e})")]
    DenominatorNearZero { index: usize, value: f64 },

    #[error("solution count binomial({n}+{m}, {m}+1) overflows a signed 64-bit integer")]
    CountOverflow { n: usize, m: usize },

    #[error("invalid g vectors: {0}")]
    InvalidG(GFailure),

    #[error("Kronecker dimension {dim} needs {entries} entries per matrix, over the cap of {cap}")]
    MemoryBudgetExceeded { dim: usize, entries: u128, cap: u128 },

    #[error("operator determinant Delta_0 is singular (condition estimate {cond:e})")]
    SingularDelta0 { cond: f64 },

    #[error("matrix pencil is singular or has infinite eigenvalues")]
    SingularPencil,

    #[error("eigenvalue iteration failed to converge")]
    ConvergenceFailure,

    #[error("Rayleigh quotient denominator z^H Delta_0 z is numerically zero")]
    DegenerateRayleigh,

    #[error("shifted matrix T_{row}(sigma, tau) is singular")]
    SingularShiftedMatrix { row: usize },

    #[error("parameter update system is singular (condition estimate {cond:e})")]
    SingularUpdateSystem { cond: f64 },

    #[error("shifted pencil Delta_1 - sigma Delta_0 is singular")]
    SingularShiftedPencil,

    #[error("Sylvester operator is singular")]
    SingularSylvesterOperator,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = NepvError> = std::result::Result<T, E>;
