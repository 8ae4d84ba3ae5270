use thiserror::Error;

/// Errors raised by validation, dataset I/O, models and explainers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value at channel {0}, timestep {1}")]
    NonFiniteValue(usize, usize),
    #[error("series too short: {0} timesteps (need at least 2)")]
    TooShort(usize),
    #[error("series has no channels")]
    NoChannels,
    #[error("rows have unequal lengths")]
    NotRectangular,
    #[error("parse error on line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("instance {0} does not match the dataset shape")]
    ShapeMismatch(usize),
    #[error("label of instance {0} is out of range")]
    LabelOutOfRange(usize),
    #[error("dataset must contain at least two distinct labels")]
    SingleClass,
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("invalid k={k} for a dataset of {n} instances")]
    BadK { k: usize, n: usize },
    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),
    #[error("failed to spawn model process: {0}")]
    SpawnError(String),
    #[error("model protocol error: {0}")]
    ProtocolError(String),
    #[error("model did not answer within {0} s")]
    ModelTimeout(f64),
    #[error("model does not provide gradients")]
    GradientUnavailable,
    #[error("no dataset instance is predicted differently from the query")]
    NoUnlikeNeighbor,
    #[error("saliency map shape or range does not match the query")]
    BadSaliencyShape,
    #[error("no dataset instance is predicted as the target class")]
    NoDistractor,
    #[error("no channel swap reaches the target class")]
    SearchFailed,
    #[error("cannot split {t} timesteps into {n} segments")]
    TooManySegments { t: usize, n: usize },
    #[error("background transform requires a background series")]
    MissingBackground,
    #[error("regression system is singular")]
    SingularSystem,
    #[error("method supports univariate series only")]
    MultivariateUnsupported,
    #[error("score {value} at ({channel}, {timestep}) is outside the declared range")]
    RangeViolation {
        channel: usize,
        timestep: usize,
        value: f64,
    },
    #[error("counterfactual is identical to the original")]
    NothingChanged,
    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonFiniteValue(..) => "NonFiniteValue",
            Error::TooShort(_) => "TooShort",
            Error::NoChannels => "NoChannels",
            Error::NotRectangular => "NotRectangular",
            Error::ParseError { .. } => "ParseError",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::LabelOutOfRange(_) => "LabelOutOfRange",
            Error::SingleClass => "SingleClass",
            Error::BadParams(_) => "BadParams",
            Error::BadK { .. } => "BadK",
            Error::InvalidProbabilities(_) => "InvalidProbabilities",
            Error::SpawnError(_) => "SpawnError",
            Error::ProtocolError(_) => "ProtocolError",
            Error::ModelTimeout(_) => "ModelTimeout",
            Error::GradientUnavailable => "GradientUnavailable",
            Error::NoUnlikeNeighbor => "NoUnlikeNeighbor",
            Error::BadSaliencyShape => "BadSaliencyShape",
            Error::NoDistractor => "NoDistractor",
            Error::SearchFailed => "SearchFailed",
            Error::TooManySegments { .. } => "TooManySegments",
            Error::MissingBackground => "MissingBackground",
            Error::SingularSystem => "SingularSystem",
            Error::MultivariateUnsupported => "MultivariateUnsupported",
            Error::RangeViolation { .. } => "RangeViolation",
            Error::NothingChanged => "NothingChanged",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
