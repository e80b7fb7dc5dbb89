use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid domain `{name}`: {reason}")]
    InvalidDomain { name: String, reason: String },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("referential integrity violated: column `{column}` row {row} holds `{value}` which is not a key of the referenced table")]
    ReferentialIntegrity {
        column: String,
        row: usize,
        value: String,
    },

    #[error("dimension table `{0}` has no feature columns loaded")]
    MissingDimensionFeatures(String),

    #[error("feature view error: {0}")]
    FeatureView(String),

    #[error("encoding error: feature `{feature}` row {row} has code {code} outside a domain of size {size}")]
    Encoding {
        feature: String,
        row: usize,
        code: u32,
        size: usize,
    },

    #[error("dataset too small: {0}")]
    TooSmall(String),

    #[error("node with no examples has undefined impurity")]
    EmptyNode,

    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("incompatible example: {0}")]
    IncompatibleExample(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
