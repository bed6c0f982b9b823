use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("matrix data length {len} does not match {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, len: usize },

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("pair term {index} has zero probability")]
    UndefinedTerm { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("outcome space of {outcomes} exceeds the enumeration limit {limit}")]
    OutcomeSpaceTooLarge { outcomes: u128, limit: u128 },

    #[error("invalid state: {0}")]
    State(String),

    #[error("training diverged at step {step}: loss = {loss}")]
    Divergence { step: usize, loss: f64 },
}
