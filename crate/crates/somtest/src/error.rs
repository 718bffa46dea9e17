use thiserror::Error;

/// Errors produced by dataset handling, model training, and the tests.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset: {0}")]
    EmptyData(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dataset has no labels")]
    MissingLabels,

    #[error("training data contains a single class")]
    SingleClass,

    #[error("degenerate test: all occupied cells collapse to {occupied} with equal sample sizes (dof <= 0)")]
    DegenerateDof { occupied: usize },

    #[error("unbalanced samples: {n_x} vs {n_z} (this test requires n_x = n_z)")]
    UnbalancedSamples { n_x: usize, n_z: usize },

    #[error("fewer than 2 blocks ({blocks}); increase the sample size or decrease the block size")]
    TooFewBlocks { blocks: usize },

    #[error("zero variance across block estimates")]
    ZeroVariance,

    #[error("csv error at line {line}: {msg}")]
    Csv { line: u64, msg: String },

    #[error("malformed document: {0}")]
    MalformedDocument(String),

    #[error("unsupported document version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("document shape inconsistent: {0}")]
    ShapeMismatch(String),

    #[error("test repetition with seed {seed} failed: {source}")]
    FailedRepetition {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
