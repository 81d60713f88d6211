use alloc::string::String;

/// Everything that can go wrong inside the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parameter outside its domain: {0}")]
    Domain(String),
    #[error("symbol outside the alphabet: {0}")]
    Alphabet(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("matrix not positive definite (smallest eigenvalue {min_eigenvalue:e}) in {context}")]
    NotPositiveDefinite { context: String, min_eigenvalue: f64 },
    #[error("numerical failure in {context}: {detail}")]
    Numerical { context: String, detail: String },
    #[error("tilt normalizer is not finite at theta={theta}, beta={beta}")]
    TiltNotFinite { theta: String, beta: String },
    #[error("{classes} count classes exceed the enumeration limit {limit}; use Monte Carlo mode")]
    GuardExceeded { classes: u128, limit: u128 },
    #[error("operation not supported: {0}")]
    Unsupported(String),
    #[error("bit stream ends before symbol {index} is determined")]
    Truncated { index: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn numerical(context: &str, detail: impl Into<String>) -> Error {
    Error::Numerical { context: context.into(), detail: detail.into() }
}
