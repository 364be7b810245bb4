use thiserror::Error;

use crate::expr::TokenId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown token id {0} for this library")]
    UnknownToken(usize),
    #[error("unknown token symbol `{0}`")]
    UnknownSymbol(String),
    #[error("invalid token library: {0}")]
    Library(String),
    #[error("traversal is not a complete expression")]
    Incomplete,
    #[error("traversal is already complete; there is no next slot")]
    AlreadyComplete,
    #[error("sequence exceeded the hard length cap of {0} tokens")]
    LengthExceeded(usize),
    #[error("every token is masked at step {step} (constraint set is jointly unsatisfiable)")]
    Unsatisfiable { step: usize },
    #[error("token {token:?} at step {step} is masked by the constraints")]
    Unreachable { step: usize, token: TokenId },
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;
