use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("group has no responses")]
    EmptyGroup,
    #[error("reward {value} at index {index} lies outside [{lower}, {upper}]")]
    RewardOutOfBounds {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("probability {value} at index {index} is not positive")]
    NonPositiveProbability { index: usize, value: f64 },
    #[error("lower bound {lower} is not below upper bound {upper}")]
    DegenerateBounds { lower: f64, upper: f64 },
    #[error("non-finite value in {field}")]
    NonFiniteInput { field: String },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("no feasible vertex found")]
    InfeasibleGroup,
    #[error("vertex oracle supports at most {max} responses, got {n}")]
    GroupTooLarge { n: usize, max: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
}

impl Error {
    /// Stable variant name, used in serialized error records.
    pub fn name(&self) -> &'static str {
        match self {
            Error::EmptyGroup => "EmptyGroup",
            Error::RewardOutOfBounds { .. } => "RewardOutOfBounds",
            Error::NonPositiveProbability { .. } => "NonPositiveProbability",
            Error::DegenerateBounds { .. } => "DegenerateBounds",
            Error::NonFiniteInput { .. } => "NonFiniteInput",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::InfeasibleGroup => "InfeasibleGroup",
            Error::GroupTooLarge { .. } => "GroupTooLarge",
            Error::InvalidConfig(_) => "InvalidConfig",
        }
    }

    pub(crate) fn non_finite(field: &str) -> Self {
        Error::NonFiniteInput {
            field: String::from(field),
        }
    }
}
