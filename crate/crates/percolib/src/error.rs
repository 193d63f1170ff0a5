use alloc::string::String;
use core::fmt;

/// Errors surfaced by core operations. Each variant maps onto a distinct
/// CLI exit code in the companion crate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Invalid parameters (bad degree, spherical tiling, p out of range, ...).
    InvalidParameter(String),
    /// An exact-enumeration cap was exceeded; the message states the cap.
    CapExceeded(String),
    /// A fit or estimate was refused for lack of usable data.
    Underpowered(String),
    /// An iterative method failed to converge within its cap.
    NonConvergence(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(m) => write!(f, "invalid parameter: {m}"),
            Error::CapExceeded(m) => write!(f, "cap exceeded: {m}"),
            Error::Underpowered(m) => write!(f, "underpowered: {m}"),
            Error::NonConvergence(m) => write!(f, "non-convergence: {m}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
