//! Crate-wide error type and exit-code mapping.
//!
//! Errors split into two families: input problems (bad files, bad schema,
//! bad config) and numerical problems (degenerate regressions, undefined
//! correlations). The CLI maps the former to exit code 2 and the latter to
//! exit code 3.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing column {column:?} in {file} header")]
    MissingColumn { file: String, column: String },

    #[error("duplicate id {id:?} in {file}")]
    DuplicateId { file: String, id: String },

    #[error(
        "schema mismatch in {file}: {dropped} of {total} rows dropped; \
         check the column mapping"
    )]
    SchemaMismatch {
        file: String,
        dropped: usize,
        total: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("length mismatch: {left} vs {right} ({context})")]
    LengthMismatch {
        left: usize,
        right: usize,
        context: &'static str,
    },

    #[error("insufficient data: need {need}, have {have} ({context})")]
    InsufficientData {
        need: usize,
        have: usize,
        context: &'static str,
    },

    #[error("non-finite value in input ({0})")]
    NonFinite(&'static str),

    #[error("degenerate regressor: x has zero variance")]
    DegenerateRegressor,

    #[error("undefined correlation: {0} has zero rank variance")]
    UndefinedCorrelation(&'static str),

    #[error("zero variance in both groups")]
    ZeroVariance,

    #[error("all tracts have clamped (zero-population) log density")]
    AllClamped,

    #[error("segment count {k} exceeds {distinct} distinct log-density values")]
    TooFewDistinct { k: usize, distinct: usize },

    #[error("no tracts match the requested geoid filter")]
    NoMatchingGeoids,

    #[error("radius {0} is not in the configured radius schedule")]
    RadiusNotInSchedule(f64),

    #[error("invalid landscape spec: {0}")]
    LandscapeSpec(String),
}

impl Error {
    /// Process exit code for the CLI: 2 for input/validation problems,
    /// 3 for internal numerical problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DegenerateRegressor
            | Error::UndefinedCorrelation(_)
            | Error::ZeroVariance
            | Error::NonFinite(_) => 3,
            _ => 2,
        }
    }

    /// Short stable identifier used in the one-line machine-readable
    /// error emitted on stderr.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Config(_) => "config",
            Error::MissingColumn { .. } => "missing_column",
            Error::DuplicateId { .. } => "duplicate_id",
            Error::SchemaMismatch { .. } => "schema_mismatch",
            Error::EmptyInput(_) => "empty_input",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::NonFinite(_) => "non_finite",
            Error::DegenerateRegressor => "degenerate_regressor",
            Error::UndefinedCorrelation(_) => "undefined_correlation",
            Error::ZeroVariance => "zero_variance",
            Error::AllClamped => "all_clamped",
            Error::TooFewDistinct { .. } => "too_few_distinct",
            Error::NoMatchingGeoids => "no_matching_geoids",
            Error::RadiusNotInSchedule(_) => "radius_not_in_schedule",
            Error::LandscapeSpec(_) => "landscape_spec",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
