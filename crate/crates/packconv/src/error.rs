//! Error type shared across the engine.

use std::fmt;
use std::io;

use crate::packing::PackingMode;

/// Errors produced by planning, packing, unpacking, backends, and I/O.
#[derive(Debug)]
pub enum Error {
    /// A companding range exceeds the representability limit of the chosen
    /// packing mode while strict bound enforcement is active.
    BoundExceeded {
        mode: PackingMode,
        r_max: u64,
        limit: u64,
    },
    /// An unpacked value exceeded the companding range, signalling that the
    /// packed stream was corrupted (bound violation upstream or backend
    /// noise past the guard). Detection only; no correction is attempted.
    UnpackOverflow {
        value: i64,
        r_max: u64,
    },
    /// The packed-signal geometry would read past the end of the source
    /// block (malformed plan).
    IndexOverrun {
        needed: usize,
        available: usize,
    },
    /// The requested backend failed precision validation for the current
    /// operating point (kernel length and companding range).
    BackendPrecisionFailure {
        backend: &'static str,
        max_abs_error: f64,
        threshold: f64,
    },
    /// A statistic or SNR is undefined because the input carries no energy.
    DegenerateSignal,
    /// Invalid configuration or arguments.
    Config(String),
    /// File I/O failure.
    Io(io::Error),
    /// A signal file did not match its declared format.
    Format(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::BoundExceeded { mode, r_max, limit } => write!(
                f,
                "companding range {r_max} exceeds the {mode} packing limit {limit}; \
                 error-free unpacking is not guaranteed"
            ),
            Error::UnpackOverflow { value, r_max } => write!(
                f,
                "unpacked value {value} exceeds the companding range {r_max}"
            ),
            Error::IndexOverrun { needed, available } => write!(
                f,
                "packing needs {needed} source samples but only {available} are available"
            ),
            Error::BackendPrecisionFailure {
                backend,
                max_abs_error,
                threshold,
            } => write!(
                f,
                "{backend} backend failed precision validation: \
                 max abs deviation {max_abs_error:.3e} exceeds {threshold:.3e}"
            ),
            Error::DegenerateSignal => write!(f, "signal carries no energy"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
            Error::Format(msg) => write!(f, "unsupported or malformed signal file: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
