use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("no marginal oracle: kernel has no analytic form and no reference sample was given")]
    MissingMarginal,
    #[error("epsilon grid must be positive and strictly increasing")]
    InvalidGrid,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error("{what} = {value} is out of range (expected {expected})")]
    OutOfRange {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("sample is empty")]
    EmptySample,
    #[error("sample too small: need at least {needed} observations, got {got}")]
    SampleTooSmall { needed: usize, got: usize },
    #[error("series too short: need at least {needed} observations, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("kernel is not an indicator step function; supply a bracketing interval")]
    NotInvertible,
    #[error("kernel `{0}` has no pair-statistic form")]
    NotIndicator(String),
    #[error("density at the quantile must be positive, got {0}")]
    DegenerateDensity(f64),
    #[error("oscillation window is empty: log log n must be positive (n = {0})")]
    WindowTooSmall(usize),
    #[error("insufficient n grid: {0}")]
    InsufficientGrid(&'static str),
    #[error("no closed-form truth for {0}")]
    NoTruth(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}
