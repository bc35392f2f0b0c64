//! Error type shared across the crate.
//!
//! Every failure carries enough context to act on: dimension errors name both
//! shapes, parse errors name the file and line, domain errors name the
//! offending coordinates. `exit_code` maps errors onto the CLI's exit-code
//! contract.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    /// Operand shapes are incompatible for an operation.
    #[error(
        "{op}: dimension mismatch: left is {lhs_rows}x{lhs_cols}, right is {rhs_rows}x{rhs_cols}"
    )]
    Dimension {
        op: &'static str,
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },

    /// An elementwise operation was applied outside its domain.
    #[error("{op}: domain error at ({row}, {col}): value {value}")]
    Domain {
        op: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },

    /// A computation produced NaN/Inf or otherwise lost numerical validity.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Data violates the attribute schema (label range, block layout, hash).
    #[error("schema error: {0}")]
    Schema(String),

    /// A line of an input file could not be parsed.
    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Invalid configuration (ratios, empty sets, bad hyperparameters).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// CLI exit code: 0 success, 2 configuration, 3 data/parse, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Schema(_) | Error::Parse { .. } | Error::Io { .. } => 3,
            Error::Dimension { .. } | Error::Domain { .. } | Error::Numerical(_) => 4,
        }
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
