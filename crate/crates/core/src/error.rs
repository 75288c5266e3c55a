use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the scattering pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid mesh: {0}")]
    Mesh(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("ADT integration failed: {0}")]
    Integration(String),
    #[error("wave packet placement: {0}")]
    Placement(String),
    #[error("propagation blew up at t = {time} a.u.")]
    Blowup { time: f64 },
    #[error("energy {energy} hartree is outside the packet band")]
    EnergyOutOfBand { energy: f64 },
    #[error("coupled-channel matching failed: {0}")]
    Matching(String),
    #[error("incomplete data, missing: {}", .missing.join(", "))]
    IncompleteData { missing: Vec<String> },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
