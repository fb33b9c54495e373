use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("optimal arm is not unique: arms {first} and {second} tie within tolerance")]
    AmbiguousOptimum { first: usize, second: usize },

    #[error("invalid gamma {0}: must lie in (0, 1]")]
    InvalidGamma(f64),

    #[error("invalid arm distribution: {0}")]
    InvalidArm(String),

    #[error("invalid preference model: {0}")]
    InvalidPreferences(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("observation coordinate {index} = {value} lies outside [0, 1]")]
    OutOfRangeObservation { index: usize, value: f64 },

    #[error("arm index {arm} out of range for {k} arms")]
    ArmOutOfRange { arm: usize, k: usize },

    #[error("preference vector is not in the support of the preference model")]
    UnknownPreference,

    #[error("horizon {horizon} is shorter than the number of arms {k}")]
    HorizonTooShort { horizon: u64, k: usize },

    #[error("t = {t} is below the threshold {threshold} where the bound applies")]
    BelowThreshold { t: f64, threshold: f64 },

    #[error("eps = {eps} must lie in (0, {l})")]
    EpsOutOfRange { eps: f64, l: f64 },

    #[error("arm {0} is not in S_1")]
    NotInS1(usize),

    #[error("arm {0} is not in S_2")]
    NotInS2(usize),

    #[error("distributions do not share a finite common support: {0}")]
    SupportMismatch(String),

    #[error("KL divergence for arm {arm} is not positive and finite: {value}")]
    NonpositiveKl { arm: usize, value: f64 },

    #[error("bound needs at least two arms")]
    TooFewArms,

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("validation error for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status for the CLI, one per error class.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Schema { .. } => 3,
            Error::Validation { .. } | Error::UnknownPreset(_) => 4,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 5,
            _ => 6,
        }
    }
}
