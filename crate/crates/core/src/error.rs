use alloc::string::String;

/// Errors produced by the clustering core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid cluster centers: {0}")]
    InvalidCenters(&'static str),
    #[error("invalid number of clusters: k = {k}, n = {n}")]
    InvalidK { k: usize, n: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            actual,
        })
    }
}
