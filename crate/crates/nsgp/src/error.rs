//! Error types shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while building kernels, evaluating the
/// objective, or running inference.
#[derive(Debug, Error)]
pub enum NsgpError {
    /// A latent or hyperparameter value is outside its domain
    /// (e.g. a nonpositive lengthscale).
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector or matrix sizes do not line up.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// An entry index is outside the valid range.
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    /// A latent state was supplied in the wrong coordinate frame.
    #[error("coordinate frame mismatch: expected {expected} frame")]
    FrameMismatch { expected: &'static str },

    /// Cholesky factorization failed even after jitter escalation.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Every optimizer restart failed; carries per-restart diagnostics.
    #[error("optimization failed: {0}")]
    Optimization(String),

    /// The sampler diverged on most transitions.
    #[error("sampling failed: {0}")]
    Sampling(String),

    /// A data, config, or model file could not be parsed.
    #[error("parse error in {path} (line {line}): {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Unknown dataset, variant, or suite name.
    #[error("unknown name: {0}")]
    UnknownName(String),

    /// A sample set or mixture was empty where at least one element is required.
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl NsgpError {
    /// Process exit code for the CLI: 2 for parse/usage problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            NsgpError::Parse { .. }
            | NsgpError::UnknownName(_)
            | NsgpError::Io { .. }
            | NsgpError::Empty(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, NsgpError>;
