use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report.
///
/// Variants are grouped into the categories the command-line front end maps
/// onto exit codes: I/O, schema (file contents), and shape/validation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("layer `{layer}`: {detail}")]
    Shape { layer: String, detail: String },

    #[error("tensor shape {shape:?} holds {expected} values, got {actual}")]
    TensorLength {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in tensor `{0}`")]
    NonFinite(String),

    #[error("unknown layer id `{0}`")]
    UnknownLayer(String),

    #[error("duplicate layer id `{0}`")]
    DuplicateLayer(String),

    #[error("layer `{layer}` has no weights to quantize")]
    NotWeighted { layer: String },

    #[error("scheme for layer `{layer}` ({target}) has not been fitted")]
    Unfitted { layer: String, target: String },

    #[error("layer `{layer}`: no weights record `{record}`")]
    MissingWeights { layer: String, record: String },

    #[error("layer `{layer}`: unknown layer kind `{kind}`")]
    UnknownLayerKind { layer: String, kind: String },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("schema violation at {location}: {message}")]
    Schema { location: String, message: String },

    #[error("malformed container: {0}")]
    Container(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error category, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Io,
    Schema,
    Validation,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } => ErrorCategory::Io,
            Error::Schema { .. }
            | Error::Container(_)
            | Error::VersionMismatch { .. }
            | Error::UnknownLayerKind { .. } => ErrorCategory::Schema,
            _ => ErrorCategory::Validation,
        }
    }

    /// Stable machine-readable code for this error.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape_mismatch",
            Error::TensorLength { .. } => "tensor_length",
            Error::NonFinite(_) => "non_finite",
            Error::UnknownLayer(_) => "unknown_layer",
            Error::DuplicateLayer(_) => "duplicate_layer",
            Error::NotWeighted { .. } => "not_weighted",
            Error::Unfitted { .. } => "unfitted_scheme",
            Error::MissingWeights { .. } => "missing_weights",
            Error::UnknownLayerKind { .. } => "unknown_layer_kind",
            Error::VersionMismatch { .. } => "version_mismatch",
            Error::Schema { .. } => "schema",
            Error::Container(_) => "container",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn shape(layer: &str, detail: impl Into<String>) -> Self {
        Error::Shape {
            layer: layer.to_string(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
