use std::path::PathBuf;

/// Errors from file formats and command runs.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: bad carrier line `{text}` (expected `# carrier_hz=<Hz>`)")]
    CarrierLine { line: u64, text: String },
    #[error("header: missing column `{0}`")]
    MissingColumn(String),
    #[error("header: column {index} should be `{expected}`, found `{found}`")]
    UnexpectedColumn {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount { line: u64, expected: usize, found: usize },
    #[error("line {line}, column `{column}`: cannot parse `{value}`")]
    Cell { line: u64, column: String, value: String },
    #[error("line {line}: {message}")]
    Record { line: u64, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Core(#[from] uavchan_core::Error),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
