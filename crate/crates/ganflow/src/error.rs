use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Two containers that must have matching shapes do not.
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    /// A point that must lie in a constraint set does not.
    #[error("point outside domain: {0}")]
    OutsideDomain(String),

    /// A parameter failed validation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An exact solver was asked for a problem above its configured size cap.
    #[error("problem size {n} exceeds cap {cap} for the exact assignment solver")]
    SizeCapExceeded { n: usize, cap: usize },

    /// A query time fell outside the recorded horizon.
    #[error("time {t} outside recorded range [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    /// A non-finite value appeared where the computation requires finite ones.
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
