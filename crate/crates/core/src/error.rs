use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid detection: {0}")]
    InvalidDetection(String),

    #[error("cannot initiate a track from a zero-area box")]
    DegenerateBox,

    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("zero-length embedding vector")]
    ZeroEmbedding,

    #[error("missing embedding on {side} {index}; disable appearance in the config instead")]
    MissingEmbedding { side: &'static str, index: usize },

    #[error("matrix shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("frame index {got} does not follow previous frame {previous}")]
    NonMonotoneFrame { previous: u32, got: u32 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("embedding file has {embeddings} lines but detection file has {detections}")]
    EmbeddingCount {
        detections: usize,
        embeddings: usize,
    },

    #[error("appearance is {mode} but embeddings were {given}")]
    AppearanceMismatch {
        mode: &'static str,
        given: &'static str,
    },

    #[error("result frame {frame} outside ground-truth range {first}..={last}")]
    FrameRange { frame: u32, first: u32, last: u32 },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("unknown ablation suite `{0}`")]
    UnknownSuite(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
