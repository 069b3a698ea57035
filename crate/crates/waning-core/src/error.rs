//! Crate-wide error type.
//!
//! Variants split into two families that the CLI maps to distinct exit
//! codes: input/data problems (malformed files, bad configuration) and
//! estimation degeneracies (estimable in principle, not on these data).

use thiserror::Error;

/// Every fallible operation in this crate returns this error.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed value in an input file, with its location.
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// Structurally invalid input (bad header, duplicate key, unknown column).
    #[error("schema error: {0}")]
    Schema(String),

    /// Interval partition violates ordering/contiguity rules.
    #[error("invalid interval spec: {0}")]
    InvalidIntervalSpec(String),

    /// Summary table violates its invariants; message lists the violations.
    #[error("invalid summary table: {0}")]
    InvalidSummaryTable(String),

    /// Simulator or estimator configuration is out of range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Probability parameter outside `[0, 1]` or rows summing past 1.
    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),

    /// A report lacks the confidence limit an operation needs.
    #[error("missing confidence interval: {0}")]
    MissingCi(String),

    /// Events recorded in a cell with zero person-time.
    #[error("zero person-time with events in cell {0}")]
    ZeroPersonTime(String),

    /// A ratio estimator's denominator is zero; names the quantity.
    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    /// Cumulative incidence decreases between consecutive intervals.
    #[error("non-monotone cumulative incidence: {0}")]
    NonMonotoneIncidence(String),

    /// A VE input makes the requested contrast undefined.
    #[error("degenerate vaccine efficacy: {0}")]
    DegenerateVe(String),

    /// Monotone likelihood: a coefficient diverged during fitting.
    #[error("separation detected: {0}")]
    Separation(String),

    /// No subjects at risk where the model needs them.
    #[error("empty risk set: {0}")]
    EmptyRiskSet(String),

    /// No events available for the requested fit.
    #[error("no events: {0}")]
    NoEvents(String),

    /// Iterative solver exhausted its iteration budget.
    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    /// Prediction time lies past the fitted follow-up horizon.
    #[error("horizon exceeded: {0}")]
    HorizonExceeded(String),

    /// Discrete hazard outside `[0, 1]`.
    #[error("hazard out of range: {0}")]
    HazardOutOfRange(String),

    /// Log transform impossible (estimate at its boundary).
    #[error("transform unavailable: {0}")]
    TransformUnavailable(String),

    /// A variance the delta method needs was flagged unavailable.
    #[error("missing variance: {0}")]
    MissingVariance(String),

    /// A rate CI was requested with zero observed events.
    #[error("zero events: {0}")]
    ZeroEvents(String),

    /// More than half of bootstrap resamples failed to estimate.
    #[error("too many failed resamples: {failed} of {total}")]
    TooManyFailedResamples { failed: usize, total: usize },
}

impl Error {
    /// Process exit code the CLI uses for this error: 2 for input/data
    /// problems, 3 for estimation degeneracies.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_)
            | Error::Parse { .. }
            | Error::Schema(_)
            | Error::InvalidIntervalSpec(_)
            | Error::InvalidSummaryTable(_)
            | Error::InvalidConfig(_)
            | Error::InvalidProbabilities(_)
            | Error::MissingCi(_) => 2,
            _ => 3,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
