use thiserror::Error;

pub type Result<T> = std::result::Result<T, KernelError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("training diverged at step {step}: {what}")]
    Divergence { step: u64, what: String },
    #[error("target index {index} out of range for {classes} classes")]
    TargetOutOfRange { index: usize, classes: usize },
    #[error("distribution has no probability mass")]
    EmptyDistribution,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParameter(String),
}

pub(crate) fn shape_err(op: &'static str, lhs: &[usize], rhs: &[usize]) -> KernelError {
    KernelError::Shape {
        op,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
}
