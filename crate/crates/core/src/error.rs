use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: truncated record {record} at byte offset {offset}", path.display())]
    TruncatedRecord {
        path: PathBuf,
        record: usize,
        offset: u64,
    },

    #[error("{}: corrupt record {record} at byte offset {offset}: label byte {label}", path.display())]
    CorruptRecord {
        path: PathBuf,
        record: usize,
        offset: u64,
        label: u8,
    },

    #[error("digest mismatch for {}: expected {expected}, found {found}", path.display())]
    DigestMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("{}: line {line}: {detail}", path.display())]
    Manifest {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("structural error at {layer}: {detail}")]
    Structure { layer: String, detail: String },

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("quality score {0} outside (0, 1]")]
    Score(f64),

    #[error("checkpoint {}: {detail}", path.display())]
    Checkpoint { path: PathBuf, detail: String },

    #[error("jpeg: {0}")]
    Jpeg(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn structure(layer: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Structure {
            layer: layer.into(),
            detail: detail.into(),
        }
    }

    /// True for failures caused by the input data rather than by usage or
    /// numerics: unreadable, truncated or corrupt files and digest mismatches.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::TruncatedRecord { .. }
                | Error::CorruptRecord { .. }
                | Error::DigestMismatch { .. }
                | Error::Manifest { .. }
                | Error::Checkpoint { .. }
        )
    }

    pub fn is_usage_error(&self) -> bool {
        matches!(self, Error::Parameter(_) | Error::Config(_))
    }
}
