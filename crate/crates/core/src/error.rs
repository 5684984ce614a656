use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// [`Error::is_numerical`] splits the variants into numerical failures
/// (exit code 3 in the CLI) and invalid requests (exit code 2).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("adaptive step {step:e} fell below the floor {floor:e} at t = {t}")]
    StepSizeUnderflow { t: f64, step: f64, floor: f64 },

    #[error("state {index} has zero standard deviation")]
    DegenerateState { index: usize },

    #[error("invalid test-function placement: {0}")]
    InvalidPlacement(String),

    #[error("degenerate test function: {0}")]
    DegenerateTestFunction(String),

    #[error("test-function support [{start}, {end}] does not fit in grid points 0..={last}")]
    SupportOutOfRange { start: usize, end: usize, last: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("test-function conditions violated: {}", format_violations(.0))]
    ConditionViolation(Vec<ConditionFailure>),

    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("state {state} of reference trajectory {trajectory} is identically zero")]
    ZeroReference { trajectory: usize, state: usize },

    #[error("affine calibration is degenerate: learned samples are constant")]
    DegenerateFit,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

/// One failed condition of the symmetric test-function constraint set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionFailure {
    /// Condition number, 1 through 5.
    pub condition: usize,
    pub residual: f64,
}

fn format_violations(v: &[ConditionFailure]) -> String {
    v.iter()
        .map(|c| format!("#{} (residual {:e})", c.condition, c.residual))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    /// True for failures of the numerics rather than of the request.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepSizeUnderflow { .. }
                | Error::DegenerateState { .. }
                | Error::DegenerateTestFunction(_)
                | Error::DegenerateData(_)
                | Error::ConditionViolation(_)
                | Error::NonFiniteLoss { .. }
                | Error::ZeroReference { .. }
                | Error::DegenerateFit
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
