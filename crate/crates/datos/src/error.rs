use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad user-supplied configuration (file contents, CLI values, parameter
    /// ranges). Maps to process exit code 1.
    #[error("configuration: {0}")]
    Config(String),

    /// Malformed text input; `line` is 1-based.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Structurally invalid data (label sets, shape mismatches, ...).
    #[error("data: {0}")]
    Data(String),

    /// Backtracking halved past 1e-300 without the sufficient-decrease test
    /// ever holding; the loss is not convex-smooth along the probed segment
    /// or the state is corrupted. Maps to exit code 2.
    #[error("line search underflow after {trials} halvings (stepsize {alpha:.3e})")]
    StepsizeUnderflow { alpha: f64, trials: u32 },

    /// Iterate norms exceeded the divergence threshold. Maps to exit code 2.
    #[error("divergence: {0}")]
    Divergence(String),

    /// Other numerical breakdown (non-finite input to a factorization, a
    /// solver fed an out-of-domain anchor, ...). Maps to exit code 2.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code the CLI reports for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Data(_) | Error::Io(_) => 1,
            Error::StepsizeUnderflow { .. } | Error::Divergence(_) | Error::Numerical(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
