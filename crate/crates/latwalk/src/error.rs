use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("site budget exceeded: need {needed} sites, budget {budget}")]
    Budget { needed: u128, budget: u64 },
    #[error("step budget exceeded after {0} jumps")]
    StepBudget(u64),
    #[error("did not converge: {0}")]
    NoConvergence(String),
    #[error("validity check failed: {0}")]
    Validity(String),
    #[error("insufficient samples: have {have}, need {need}")]
    InsufficientSamples { have: usize, need: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
