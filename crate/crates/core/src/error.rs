use thiserror::Error;

/// Errors raised by the analysis routines.
///
/// Values are carried as `f64` regardless of the scalar type the computation
/// ran in, so the error type stays independent of the generic parameter.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no outer branch: level {level} is not above both half-line minima (max {floor})")]
    NoOuterBranch { level: f64, floor: f64 },

    #[error("step size underflow at t = {t}, (x, y) = ({x}, {y})")]
    StepSizeUnderflow { t: f64, x: f64, y: f64 },

    #[error("step budget of {steps} steps exhausted at t = {t}")]
    StepBudgetExhausted { steps: usize, t: f64 },

    #[error("{what} did not converge: last change {err_est} at cutoff {x_far}")]
    ConvergenceFailure { what: String, x_far: f64, err_est: f64 },

    #[error("bracket failure: {0}")]
    BracketFailure(String),

    #[error("anomalous separatrix crossing at y = {value} (expected y < 0)")]
    Anomalous { value: f64 },

    #[error("no return to the section: {0}")]
    NoReturn(String),

    #[error("expected exactly one stable cycle, found {found}")]
    CountMismatch { found: usize },

    #[error("output exceeds size cap ({bytes} > {cap} bytes)")]
    SizeCap { bytes: usize, cap: usize },
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepSizeUnderflow { .. }
                | Error::StepBudgetExhausted { .. }
                | Error::ConvergenceFailure { .. }
                | Error::BracketFailure(_)
                | Error::Anomalous { .. }
                | Error::NoReturn(_)
                | Error::CountMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
