use thiserror::Error;

use crate::data::DataError;
use crate::features::FeatureError;
use crate::gee::GeeError;
use crate::prob::ProbError;
use crate::wcls::WclsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Wcls(#[from] WclsError),
    #[error(transparent)]
    Gee(#[from] GeeError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("simulation failed: {0}")]
    Simulation(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable identifier of the error variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Data(e) => match e {
                DataError::MissingColumn(_) => "missing_column",
                DataError::RaggedPanel(_) => "ragged_panel",
                DataError::InvariantViolation(_) => "invariant_violation",
                DataError::ParseError { .. } => "parse_error",
                DataError::Io(_) => "io",
            },
            Error::Feature(e) => match e {
                FeatureError::Syntax { .. } => "feature_syntax",
                FeatureError::NotInHistory(_) => "feature_not_in_history",
                FeatureError::UnknownColumn { .. } => "missing_column",
                FeatureError::FeatureEvaluation { .. } => "feature_evaluation",
                FeatureError::NumeratorOutsideModerators(_) => "numerator_outside_moderators",
                FeatureError::InvalidSpec(_) => "invalid_spec",
            },
            Error::Prob(e) => match e {
                ProbError::Separation { .. } => "separation",
                ProbError::RankDeficient { .. } => "rank_deficient",
                ProbError::NonConvergence { .. } => "non_convergence",
                ProbError::Degenerate(_) => "degenerate_probability",
                ProbError::Positivity { .. } => "positivity",
                ProbError::MissingProbability { .. } => "missing_probability",
                ProbError::InvalidSpec(_) => "invalid_spec",
            },
            Error::Wcls(e) => match e {
                WclsError::SingularSystem { .. } => "singular_system",
                WclsError::DimensionMismatch(_) => "dimension_mismatch",
                WclsError::SingularLeverage { .. } => "singular_leverage",
                WclsError::VarianceNotComputed => "variance_not_computed",
                WclsError::DegreesOfFreedomExhausted { .. } => "degrees_of_freedom_exhausted",
                WclsError::InvalidContrast(_) => "invalid_contrast",
                WclsError::Prob(p) => Error::Prob(p.clone()).code(),
            },
            Error::Gee(e) => match e {
                GeeError::SingularSystem { .. } => "singular_system",
                GeeError::NonPositiveDefiniteCorrelation(_) => "non_positive_definite_correlation",
                GeeError::DimensionMismatch(_) => "dimension_mismatch",
                GeeError::SingularLeverage { .. } => "singular_leverage",
            },
            Error::Config(_) => "config",
            Error::Simulation(_) => "simulation_failed",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
