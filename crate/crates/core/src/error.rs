use thiserror::Error;

/// Errors raised by the reconstruction pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Array extents disagree with each other or with the scan geometry.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A configured resource budget would be exceeded.
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    /// A non-finite intermediate value appeared during evaluation.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite<'a>(values: impl IntoIterator<Item = &'a f64>, what: &str) -> Result<()> {
    match values.into_iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Domain(format!("{what} has a non-finite value at flat index {i}"))),
        None => Ok(()),
    }
}
