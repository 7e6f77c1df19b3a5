use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("entry {index} is negative or not finite ({value})")]
    InvalidEntry { index: usize, value: f64 },
    #[error("all entries are zero")]
    ZeroMass,
    #[error("entries sum to {sum}, which is not within tolerance of 1")]
    NotNormalized { sum: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid strategy profile{}: {reasons}", round.map(|r| format!(" at round {r}")).unwrap_or_default())]
    InvalidProfile { round: Option<usize>, reasons: String },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("market forecast undefined: total stake is zero")]
    ZeroStake,
    #[error("allocation has a zero component at index {index}")]
    ZeroComponent { index: usize },
    #[error("environment: {0}")]
    Environment(String),
    #[error("strategy: {0}")]
    Strategy(String),
    #[error("debit schedule: {0}")]
    Schedule(String),
    #[error("environment does not expose an enumerable outcome distribution")]
    NotEnumerable,
    #[error("oracle component {component} = {value} fell below the declared floor {floor} at round {round}")]
    OracleBelowFloor { round: usize, component: usize, value: f64, floor: f64 },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Error::Config { path: path.into(), message: message.to_string() }
    }

    /// True for errors caused by an invalid experiment description rather
    /// than by a failure while running it.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}
