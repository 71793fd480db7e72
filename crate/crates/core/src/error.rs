use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("evaluation produced a non-finite value at coordinate {index}")]
    Evaluation { index: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("unknown product `{0}`")]
    UnknownProduct(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("internal consistency error: {0}")]
    Internal(String),
    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Diverged { epoch: usize, loss: f64 },
    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(what: &'static str, expected: usize, got: usize) -> Self {
        Error::Shape {
            what,
            expected,
            got,
        }
    }
}
