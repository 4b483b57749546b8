use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("coordinate {value} outside [1, {delta}]")]
    OutOfRange { value: i64, delta: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("center set is empty")]
    EmptyCenters,
    #[error("enumeration budget exceeded: {needed} combinations > {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("support too large for exact transport: {size} > {limit}")]
    SupportTooLarge { size: usize, limit: usize },
    #[error("sparse recovery overflow: {recovered} entries recovered, budget {budget}")]
    RecoveryOverflow { recovered: usize, budget: usize },
    #[error("negative multiplicity at update {index}")]
    NegativeMultiplicity { index: u64 },
    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
    #[error("sketch mismatch: {0}")]
    SketchMismatch(&'static str),
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }
}
