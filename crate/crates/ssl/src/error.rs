use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum SslError {
    /// Input outside the mathematical domain of an operation (cusps,
    /// coincident points, empty divisor where one is required, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed (singular linear system, evaluation at a
    /// singular point, chart range exceeded, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Enumeration or subset scan would exceed the configured guard.
    #[error("combinatorial guard: {0}")]
    Guard(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, SslError>;
