use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments: mismatched fields or dimensions, out-of-range parameters.
    #[error("usage error: {0}")]
    Usage(String),
    /// Mathematically undefined request: singular matrix, zero inverse, etc.
    #[error("domain error: {0}")]
    Domain(String),
    /// Exhaustive enumeration or retry budget exceeded.
    #[error("budget exceeded: {what} needs {needed}, limit is {limit}")]
    Budget {
        what: &'static str,
        needed: f64,
        limit: f64,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
