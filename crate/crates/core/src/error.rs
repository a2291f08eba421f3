use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("duplicate station id `{0}`")]
    DuplicateStation(String),
    #[error("series references unknown station `{0}`")]
    UnknownStation(String),
    #[error("negative wind speed {value} at station `{station}`")]
    NegativeWindSpeed { station: String, value: f64 },
    #[error("non-finite value at station `{0}`")]
    NonFinite(String),
    #[error("timestamp {0} is not aligned to a whole UTC hour")]
    NotHourAligned(i64),
    #[error("invalid coordinates ({lat}, {lon}) for station `{station}`")]
    InvalidCoordinates { station: String, lat: f64, lon: f64 },
    #[error("empty series for station `{0}`")]
    EmptySeries(String),
    #[error("invalid parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("too few observations: need at least {needed}, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("degenerate sample: all values equal")]
    DegenerateSample,
    #[error("degenerate ranks: all values equal")]
    DegenerateRanks,
    #[error("percentile at upper bound (p = {0})")]
    PercentileAtUpperBound(f64),
    #[error("insufficient overlap: {got} common points, need {needed}")]
    InsufficientOverlap { needed: usize, got: usize },
    #[error("insufficient neighbours: {got} candidate stations, need {needed}")]
    InsufficientNeighbours { needed: usize, got: usize },
    #[error("degenerate design: {0}")]
    DegenerateDesign(&'static str),
    #[error("covariance not positive definite")]
    NotPositiveDefinite,
    #[error("out-of-domain hyperparameter `{name}` = {value}")]
    OutOfDomain { name: &'static str, value: f64 },
    #[error("optimizer did not converge after {iterations} iterations (gradient norm {grad_norm:.3e}, best objective {best:.6})")]
    NotConverged {
        iterations: usize,
        grad_norm: f64,
        best: f64,
    },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("target covariate missing for `{0}`")]
    MissingCovariate(String),
    #[error("observation {y} outside grid [{lo}, {hi}]")]
    OutsideGrid { y: f64, lo: f64, hi: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = core::result::Result<T, Error>;
