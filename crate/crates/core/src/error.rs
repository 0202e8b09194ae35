use thiserror::Error;

/// Errors raised by the mechanism, parameter and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("an instance needs at least one expert and one proposal")]
    EmptyInstance,

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("{field} = {value} is outside {range}")]
    OutOfRange {
        field: String,
        value: f64,
        range: &'static str,
    },

    #[error("vote {field} must be 0 or 1, found {value}")]
    NonBinaryVote { field: String, value: u8 },

    #[error("at most {max} proposals are supported, found {found}")]
    TooManyProposals { max: usize, found: usize },

    #[error("expert index {0} out of range")]
    NoSuchExpert(usize),

    #[error("proposal index {0} out of range")]
    NoSuchProposal(usize),

    #[error("expert {expert} has zero weight but a positive external reward on proposal {proposal}")]
    ZeroWeightExternal { expert: usize, proposal: usize },

    #[error("invalid reward schedule: {0}")]
    InvalidSchedule(String),

    #[error("threshold T = {0} is degenerate, it must lie strictly inside (0, 1)")]
    DegenerateThreshold(f64),

    #[error("condition 1/(epsilon + 1) < T violated: epsilon = {epsilon}, T = {threshold}")]
    EpsilonCondition { epsilon: f64, threshold: f64 },

    #[error("condition a >= a' violated: a = {a}, a' = {a_prime}")]
    RewardDominance { a: f64, a_prime: f64 },

    #[error("supplied delta = {supplied} is below the bound {required} implied by the external rewards")]
    DeltaTooSmall { supplied: f64, required: f64 },

    #[error("exhaustive enumeration refused: n*k = {cells} exceeds the limit of {limit}")]
    EnumerationGuard { cells: usize, limit: usize },

    #[error("deviation search refused: {plans} plans exceed the limit of {limit}")]
    SearchGuard { plans: u128, limit: u128 },

    #[error("discount factor {gamma} is not below the admissible maximum {max}")]
    DiscountTooLarge { gamma: f64, max: f64 },

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
