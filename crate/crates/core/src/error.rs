use std::path::PathBuf;

use thiserror::Error;

use crate::scenario::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{quantity} = {value} is outside the model domain ({constraint})")]
    Domain {
        quantity: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("scenario is invalid:\n{}", format_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("non-finite value in channel `{channel}` at t = {t:.9} s")]
    NonFinite { channel: &'static str, t: f64 },

    #[error("DC-link voltage {v_o:.3} V at t = {t:.9} s is below {v_min:.3} V needed to synthesize grid current")]
    DcLinkCollapse { t: f64, v_o: f64, v_min: f64 },

    #[error("unknown channel `{name}`; available: {}", .available.join(", "))]
    UnknownChannel { name: String, available: Vec<String> },

    #[error("unknown scenario parameter `{0}`")]
    UnknownParameter(String),

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("malformed trace: {0}")]
    Trace(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite { .. } | Error::DcLinkCollapse { .. } => 3,
            _ => 2,
        }
    }
}
