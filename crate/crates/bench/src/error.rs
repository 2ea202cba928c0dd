use std::io;

use thiserror::Error;

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum ExitCode {
    Success = 0,
    Usage = 1,
    VerificationFailed = 2,
    Io = 3,
    Numerical = 4,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Usage(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Core(#[from] fagp::Error),
}

impl BenchError {
    pub fn usage(msg: impl Into<String>) -> Self {
        BenchError::Usage(msg.into())
    }

    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        BenchError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            BenchError::Usage(_) | BenchError::Config { .. } => ExitCode::Usage,
            BenchError::Verification(_) => ExitCode::VerificationFailed,
            BenchError::Io { .. } => ExitCode::Io,
            BenchError::Core(e) => match e {
                fagp::Error::Io(_) | fagp::Error::Parse { .. } => ExitCode::Io,
                e if e.is_numerical() => ExitCode::Numerical,
                _ => ExitCode::Usage,
            },
        }
    }
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
