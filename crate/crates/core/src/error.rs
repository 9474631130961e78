use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The accuracy target has no tabulated protocol parameter and no override was given.
    #[error(
        "no tabulated {param} for {key} = {value}; supply an explicit value or run calibration"
    )]
    UnknownAccuracyKey {
        param: &'static str,
        key: &'static str,
        value: f64,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Every slot of a balls-and-bins trial was busy, so the empty-slot estimator is undefined.
    #[error("all {ell} slots busy; empty-slot estimator undefined")]
    AllSlotsBusy { ell: u64 },

    /// No presence scenario reproduces an observed block. Only a simulator bug can cause this.
    #[error("block outcome {0} is not reproducible by any presence scenario")]
    InconsistentOutcome(String),

    #[error("threshold function for T = {t} does not cross its level on (0, {upper}]")]
    NoBracket { t: usize, upper: f64 },

    #[error("invalid population: {0}")]
    InvalidPopulation(String),

    #[error("invalid configuration for `{field}`: {reason}")]
    Config { field: String, reason: String },
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
