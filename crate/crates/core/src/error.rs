use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at column {col}: {msg}")]
    Parse { msg: String, col: usize },

    #[error("evaluation error: {0}")]
    Eval(#[from] EvalError),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("config error (line {line}): {msg}")]
    Config { msg: String, line: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite value in `{0}`")]
    NonFinite(&'static str),
}

impl Error {
    /// Process exit code used by the CLI: 1 for validation problems,
    /// 2 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::InvalidInput(_) | Error::Config { .. } => 1,
            Error::Eval(_) | Error::Numerical(_) | Error::Divergent(_) | Error::Io(_) => 2,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
