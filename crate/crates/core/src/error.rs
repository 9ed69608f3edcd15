use std::path::PathBuf;

use thiserror::Error;

/// Error type shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported exterior: {0}")]
    UnsupportedExterior(String),

    #[error("point {0:?} is not within 2h of the interface")]
    NotABoundaryPoint(Vec<f64>),

    #[error("operation requires a sharp indicator (all cells in {{0,1}})")]
    RequiresSharp,

    #[error("graph slope {slope} exceeds the cap {cap}")]
    SteepGraph { slope: f64, cap: f64 },

    #[error("resolution too coarse: {0}")]
    Resolution(String),

    #[error("divergent interaction: {0}")]
    Divergent(String),

    #[error("insufficient resolution: only {found} usable radii (need {needed})")]
    InsufficientRadii { found: usize, needed: usize },

    #[error("oracle refused: {0}")]
    OracleRefusal(String),

    #[error("ordering violation: {0}")]
    Ordering(String),

    #[error("singular linear system")]
    Singular,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
