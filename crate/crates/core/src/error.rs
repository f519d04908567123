use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller broke a precondition (shape mismatch, bad parameter range).
    #[error("contract violation: {0}")]
    Contract(String),
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A constructed object failed its invariant checks.
    #[error("validation error: {0}")]
    Validation(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    /// The grid cannot represent the requested state.
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("observer error: {0}")]
    Observer(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! ensure {
    ($cond:expr, $kind:ident, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::$kind(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
