use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero covector has no causal class")]
    ZeroCovector,
    #[error("covector {0:?} is not space-like")]
    NotSpaceLike([f64; 4]),
    #[error("covector {0:?} is not light-like")]
    NotLightLike([f64; 4]),
    #[error("symbol evaluated on the light cone at {0:?}; apply the cutoff first")]
    LightLikeEvaluation([f64; 4]),
    #[error("pseudoinverse of the zero operator")]
    ZeroOperator,
    #[error("expected a {expected} domain field, got {found}")]
    DomainMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("phantom support leaves the grid interior: {0}")]
    SupportOverflow(String),
    #[error("format error in {field}: {message}")]
    Format { field: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
