use thiserror::Error;

/// Errors raised by the library. Every variant carries enough context to be
/// reported verbatim by the command-line front end.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sequence is not strictly increasing at index {index}")]
    NotIncreasing { index: usize },

    #[error("sequence is too short: need at least {needed} terms, have {have}")]
    SequenceTooShort { needed: usize, have: usize },

    #[error("guard-bit rule violated: {bits} bits cannot hold multiplier of {multiplier_bits} bits plus {guard} guard bits")]
    GuardBits {
        bits: u32,
        multiplier_bits: u64,
        guard: u32,
    },

    #[error("singularity: function is undefined at u = {at}")]
    Singularity { at: f64 },

    #[error("singular evaluation at term k = {k}")]
    SingularTerm { k: usize },

    #[error("function is not square integrable: {0}")]
    NotSquareIntegrable(String),

    #[error("function has unbounded or unknown total variation: {0}")]
    UnboundedVariation(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("size guard exceeded: {what} = {value} > {limit}")]
    SizeGuard {
        what: &'static str,
        value: String,
        limit: String,
    },

    #[error("coupling infeasible: transport within distance {eps} carries only {flow} of the mass")]
    Infeasible { eps: f64, flow: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("zero variance: {0}")]
    ZeroVariance(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
