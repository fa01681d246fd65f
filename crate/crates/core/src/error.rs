use thiserror::Error;

/// Errors raised by model construction, contour evaluation and inference.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid value for `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("parameter {theta} is outside the parameter space of `{model}`")]
    OutsideParameterSpace { model: String, theta: f64 },

    #[error("observation {observation} is not in the sample space of `{model}`")]
    NotInSampleSpace { model: String, observation: String },

    #[error("model `{0}` cannot enumerate its sample space")]
    NotEnumerable(String),

    #[error("model `{0}` has no closed-form contour")]
    NoClosedForm(String),

    #[error("invalid parameter grid: {0}")]
    InvalidGrid(String),

    #[error("invalid hypothesis: {0}")]
    InvalidHypothesis(String),

    #[error("hypothesis {hypothesis} extends outside the integration window [{lo}, {hi}]")]
    OutsideWindow { hypothesis: String, lo: f64, hi: f64 },

    #[error("ensemble members disagree at probe x={observation}, theta={theta}: `{member}` gives eta {got}, expected {expected}")]
    EnsembleMismatch {
        member: String,
        observation: String,
        theta: f64,
        got: f64,
        expected: f64,
    },

    #[error("degenerate normalizer: {0}")]
    DegenerateNormalizer(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// Whether the error stems from bad user input rather than a numeric failure.
    pub fn is_spec_error(&self) -> bool {
        !matches!(self, Error::Numeric(_) | Error::DegenerateNormalizer(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
