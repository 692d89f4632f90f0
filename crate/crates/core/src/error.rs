use alloc::string::String;
use core::fmt;

/// Errors raised by the kinetics, simulation and solver engines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Emission size, system kind or solver configuration is out of range.
    InvalidParams(String),
    /// A cluster distribution violates its invariants (negative entry,
    /// empty support, wrong normalization, wrong kind).
    InvalidInitialDistribution(String),
    /// The rate normalizer (interaction mass or `m_1^2`) fell below the
    /// exhaustion threshold.
    DivisionByExhaustion { denominator: f64 },
    /// No permissible ordered pair of clusters remains.
    Exhausted,
    /// Evaluation requested outside the domain where the formula holds.
    DomainError(String),
    /// Adaptive quadrature could not reach its tolerance.
    QuadratureFailure { a: f64, b: f64, estimate: f64 },
    /// The moment hierarchy blew up, signalling gelation.
    GelationReached { t: f64 },
    /// A negative component larger than the clamp tolerance appeared.
    NegativeState { size: usize, value: f64 },
    /// The integrator could not make progress above its minimal step.
    StepFailure { t: f64, h: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
            Error::InvalidInitialDistribution(msg) => {
                write!(f, "invalid cluster distribution: {msg}")
            }
            Error::DivisionByExhaustion { denominator } => {
                write!(
                    f,
                    "rate normalizer {denominator:e} is below the exhaustion threshold"
                )
            }
            Error::Exhausted => f.write_str("no permissible reaction remains"),
            Error::DomainError(msg) => write!(f, "domain error: {msg}"),
            Error::QuadratureFailure { a, b, estimate } => write!(
                f,
                "quadrature on [{a}, {b}] did not converge (error estimate {estimate:e})"
            ),
            Error::GelationReached { t } => write!(f, "moment blow-up (gelation) at t = {t}"),
            Error::NegativeState { size, value } => {
                write!(
                    f,
                    "component u_{size} = {value:e} is below the clamp tolerance"
                )
            }
            Error::StepFailure { t, h } => {
                write!(f, "step size {h:e} fell below the minimum at t = {t}")
            }
        }
    }
}

impl core::error::Error for Error {}
