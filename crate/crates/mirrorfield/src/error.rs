//! Error taxonomy shared across the library.
//!
//! Two failure families matter to callers: a request that violates an
//! operation's preconditions (`Validation`), and a computation whose internal
//! accuracy checks did not converge (`Numerics`).  The CLI maps them to exit
//! codes 2 and 3 respectively.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The input violates a documented precondition; the message names the
    /// offending invariant.
    #[error("validation: {0}")]
    Validation(String),

    /// A numerical routine failed its own accuracy or convergence check; the
    /// message carries the residual estimate.
    #[error("numerics: {0}")]
    Numerics(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub(crate) fn numerics(msg: impl Into<String>) -> Error {
    Error::Numerics(msg.into())
}
