use thiserror::Error;

/// Errors raised by the sampling primitives and the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input contains a non-finite value at index {0}")]
    NonFiniteInput(usize),
    #[error("input contains a negative value at index {0}")]
    NegativeInput(usize),
    #[error("input contains a non-positive value at index {0}")]
    NonPositiveInput(usize),
    #[error("weights sum to zero")]
    ZeroSum,
    #[error("empty input")]
    Empty,
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("x has mass at index {0} where y is zero")]
    SupportMismatch(usize),
    #[error("q is zero at index {0} where a has mass")]
    ZeroProbabilityWithMass(usize),
    #[error("observed client {0} has zero probability")]
    ZeroProbabilityObserved(usize),
    #[error("selected client {0} has zero probability")]
    ZeroProbabilitySelected(usize),
    #[error("invalid bandit feedback: {0}")]
    InvalidFeedback(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("horizon must be at least 2, got {0}")]
    DegenerateHorizon(usize),
    #[error("learning-rate schedule must be positive and nonincreasing")]
    InvalidSchedule,
    #[error("pre-training phase returned no responsive clients")]
    EmptyPretrain,
    #[error("pre-training estimate is not positive")]
    DegenerateEstimate,
    #[error("all expert weights underflowed")]
    WeightUnderflow,
    #[error("chosen clients exhaust the probability mass")]
    ExhaustedMass,
    #[error("cannot draw {k} distinct clients out of {m}")]
    KExceedsM { k: usize, m: usize },
    #[error("no local update supplied for client {0}")]
    MissingLocal(usize),
    #[error("malformed csv: {0}")]
    MalformedCsv(String),
    #[error("client {0} has no rows")]
    EmptyClient(usize),
    #[error("training diverged at round {0}")]
    Diverged(usize),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
