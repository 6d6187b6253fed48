use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed input file. `line` is 1-based; `column` names the field
    /// when the problem is confined to a single cell.
    #[error("{}", format_parse(.file, *.line, .column.as_deref(), .message))]
    Parse {
        file: String,
        line: usize,
        column: Option<String>,
        message: String,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero variance in returns of ticker '{0}'")]
    ZeroVariance(String),

    #[error("graph is disconnected")]
    Disconnected,

    #[error("unknown ticker '{0}'")]
    UnknownTicker(String),

    #[error("zero vector for '{0}': cosine similarity undefined")]
    ZeroVector(String),

    #[error("missing label for ticker '{0}'")]
    MissingLabel(String),
}

fn format_parse(file: &str, line: usize, column: Option<&str>, message: &str) -> String {
    match column {
        Some(col) => format!("{file}:{line}: column '{col}': {message}"),
        None => format!("{file}:{line}: {message}"),
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.to_string(),
            line,
            column: None,
            message: message.into(),
        }
    }

    pub(crate) fn parse_cell(
        file: &str,
        line: usize,
        column: &str,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            file: file.to_string(),
            line,
            column: Some(column.to_string()),
            message: message.into(),
        }
    }

    /// Short machine-readable category, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::InvalidData(_) => "invalid_data",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::ZeroVariance(_) => "zero_variance",
            Error::Disconnected => "disconnected",
            Error::UnknownTicker(_) => "unknown_ticker",
            Error::ZeroVector(_) => "zero_vector",
            Error::MissingLabel(_) => "missing_label",
        }
    }
}
