use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("harmonic order {order} at {freq_hz} Hz violates Nyquist for fs = {fs} Hz")]
    Nyquist { order: usize, freq_hz: f64, fs: f64 },

    #[error("{}line {line}: {msg}", path_prefix(.path))]
    Parse {
        path: Option<PathBuf>,
        line: usize,
        msg: String,
    },

    #[error("{}missing required key `{key}`", path_prefix(.path))]
    MissingKey { path: Option<PathBuf>, key: String },

    #[error("sampling interval mismatch: stream {stream} s, config {config} s")]
    TsMismatch { stream: f64, config: f64 },

    #[error("estimator diverged at sample {index}")]
    Diverged { index: u64 },

    #[error("estimator already diverged; re-initialize before stepping")]
    AlreadyDiverged,

    #[error("estimate and truth series do not overlap")]
    NoOverlap,

    #[error("measured signal has zero energy over the evaluation span")]
    ZeroEnergy,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn path_prefix(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!("{}: ", p.display()),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: None,
            line,
            msg: msg.into(),
        }
    }

    /// Attach a file path to parse-style errors.
    pub fn with_path(self, p: impl Into<PathBuf>) -> Self {
        match self {
            Error::Parse { line, msg, .. } => Error::Parse {
                path: Some(p.into()),
                line,
                msg,
            },
            Error::MissingKey { key, .. } => Error::MissingKey {
                path: Some(p.into()),
                key,
            },
            other => other,
        }
    }
}
