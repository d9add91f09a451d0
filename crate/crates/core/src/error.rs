use thiserror::Error;

/// Errors raised by the integrators, validators and models.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fixed-point iteration did not converge in {iterations} iterations (last update {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("fixed-point iteration produced a non-finite iterate")]
    Divergence,

    #[error("state {state:?} is outside the domain: {reason}")]
    DomainExit { state: Vec<f64>, reason: String },

    #[error("missing derivative data: {0}")]
    MissingDerivative(&'static str),

    #[error("exponent {0} exceeds the overflow cap")]
    Overflow(f64),

    #[error("chart Jacobian is singular at {point:?} (condition estimate {condition:e})")]
    SingularJacobian { point: Vec<f64>, condition: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("sample {sample} (seed {seed}, stream {sample}) failed: {source}")]
    SampleFailed {
        sample: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(state: &[f64], reason: impl Into<String>) -> Self {
        Error::DomainExit {
            state: state.to_vec(),
            reason: reason.into(),
        }
    }

    /// Strips `StepFailed` / `SampleFailed` wrappers.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::StepFailed { source, .. } | Error::SampleFailed { source, .. } => {
                source.root_cause()
            }
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
