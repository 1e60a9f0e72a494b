use std::fmt;

use adawct::Error as CoreError;

use crate::tensor_file::FormatError;

/// Process exit codes. The set is exhaustive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    VerificationFailed = 1,
    MalformedInput = 2,
    BadArguments = 3,
    Divergence = 4,
    SymmetryViolation = 5,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    pub fn new(exit: Exit, message: impl Into<String>) -> Self {
        Self {
            exit,
            message: message.into(),
        }
    }

    pub fn bad_args(message: impl Into<String>) -> Self {
        Self::new(Exit::BadArguments, message)
    }

    pub fn malformed(message: impl Into<String>) -> Self {
        Self::new(Exit::MalformedInput, message)
    }

    /// Classifies a library error raised while computing.
    pub fn from_core(context: &str, err: CoreError) -> Self {
        let exit = match err {
            CoreError::Divergence { .. }
            | CoreError::DegenerateActivations
            | CoreError::NoConvergence { .. }
            | CoreError::EigenvalueTooSmall { .. }
            | CoreError::CrossCheck { .. } => Exit::Divergence,
            CoreError::NonFinite { .. } | CoreError::LengthMismatch { .. } => Exit::MalformedInput,
            CoreError::InvalidShape(_)
            | CoreError::DimensionMismatch { .. }
            | CoreError::InvalidConfig(_)
            | CoreError::ZeroNorm
            | CoreError::NotPositiveSemidefinite { .. }
            | CoreError::UnknownSolver(_) => Exit::BadArguments,
        };
        Self::new(exit, format!("{context}: {err}"))
    }

    pub fn from_format(path: &str, err: FormatError) -> Self {
        Self::malformed(format!("{path}: {err}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::bad_args(format!("i/o error: {err}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
