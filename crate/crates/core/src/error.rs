use std::io;

use thiserror::Error;

use crate::data::IdxError;
use crate::protocol::{DecodeError, ProtocolError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("wire decode failed: {0}")]
    Decode(#[from] DecodeError),

    #[error("idx parse failed: {0}")]
    Idx(#[from] IdxError),

    #[error(transparent)]
    Protocol(#[from] ProtocolError),

    #[error("malformed {kind} file: {msg}")]
    Format { kind: &'static str, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Shorthand for building an `InvalidArgument` error.
pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

pub(crate) fn malformed<T>(kind: &'static str, msg: impl Into<String>) -> Result<T> {
    Err(Error::Format { kind, msg: msg.into() })
}
