use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("layout error: {0}")]
    Layout(String),

    #[error("invalid action {action}: the world has {num_actions} actions")]
    InvalidAction { action: usize, num_actions: usize },

    #[error("state {0} is not a valid free cell")]
    InvalidState(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("batch is empty")]
    EmptyBatch,

    #[error("expected a {expected} model, got a {actual} model")]
    ModelDirection {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("component mismatch: {0}")]
    ComponentMismatch(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
