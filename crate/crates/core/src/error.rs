use alloc::boxed::Box;
use alloc::string::String;

/// Errors raised by the attack pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid coordinate: lat {lat}, lon {lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("spatial index needs at least one point")]
    EmptyIndex,
    #[error("radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("need at least {needed} POIs, only {available} available")]
    TooFewPois { needed: usize, available: usize },
    #[error("training labels contain fewer than two classes")]
    SingleClass,
    #[error("non-finite feature value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("fewer users ({users}) than folds ({folds})")]
    TooFewUsers { users: usize, folds: usize },
    #[error("degenerate coordinates: {0}")]
    DegenerateCoordinates(String),
    #[error("label {0:?} is neither mapped nor dropped")]
    UnmappedLabel(String),
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn in_fold(self, fold: usize) -> Self {
        Error::Fold {
            fold,
            source: Box::new(self),
        }
    }
}
