use crate::units::Frame;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("delay bin {bin} is outside the grid of {num_bins} bins")]
    OutOfRange { bin: usize, num_bins: usize },

    #[error("angle frame mismatch: expected {expected:?}, found {found:?}")]
    FrameMismatch { expected: Frame, found: Frame },

    #[error("no RIS gain sample at theta_out = {theta_out:.3} deg, theta_in = {theta_in:.3} deg")]
    MissingGain { theta_out: f64, theta_in: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(
        "channel delay span {span_ns:.1} ns exceeds the unambiguous range of {unambiguous_ns:.1} ns"
    )]
    Aliasing { span_ns: f64, unambiguous_ns: f64 },

    #[error("{file}: schema error: {message}")]
    Schema { file: String, message: String },

    #[error("{file}:{line}: parse error: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("missing input for path pair {0}")]
    MissingPair(String),

    #[error("max |dP| = {max_abs_delta:.2} dB exceeds tolerance {tolerance:.2} dB")]
    Tolerance { max_abs_delta: f64, tolerance: f64 },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn validation(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: msg.into(),
        }
    }

    /// Process exit code used by the `riscas` binary.
    ///
    /// 1 for I/O, parse and input errors, 2 for a tolerance breach and 3 for
    /// an internal invariant failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Tolerance { .. } => 2,
            Error::Invariant(_) => 3,
            _ => 1,
        }
    }
}
