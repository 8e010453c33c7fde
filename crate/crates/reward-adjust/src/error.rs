use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite logits after step {step} (prompt {prompt})")]
    NonFiniteLogits { step: usize, prompt: usize },
    #[error(transparent)]
    Core(#[from] reward_adjust_core::Error),
}
