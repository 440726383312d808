use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A parameter lies outside its admissible range.
    Parameter(String),
    /// The requested operating point cannot be served securely.
    Infeasible(String),
    /// The file size does not split into equal subfiles.
    Indivisible { file_bits: usize, divisor: u128 },
    /// A cache, registry or payload is inconsistent with the scheme that
    /// should have produced it.
    Integrity(String),
    /// Exhaustive enumeration would exceed the configured size.
    EnumerationBound { required_bits: u32, limit_bits: u32 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parameter(msg) => write!(f, "parameter error: {msg}"),
            Error::Infeasible(msg) => write!(f, "{msg}"),
            Error::Indivisible { file_bits, divisor } => write!(
                f,
                "configuration error: file size {file_bits} bits is not divisible by {divisor}"
            ),
            Error::Integrity(msg) => write!(f, "integrity error: {msg}"),
            Error::EnumerationBound {
                required_bits,
                limit_bits,
            } => write!(
                f,
                "enumeration needs 2^{required_bits} outcomes, limit is 2^{limit_bits}"
            ),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

pub(crate) fn integrity(msg: impl Into<String>) -> Error {
    Error::Integrity(msg.into())
}
