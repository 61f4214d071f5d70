use thiserror::Error;

/// Errors raised across the lab.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph contains a cycle through node {node}")]
    CycleDetected { node: usize },
    #[error("graph has {count} leaves (nodes without children), expected exactly one")]
    MultipleLeaves { count: usize },
    #[error("node {node} expects {expected} parents, got {found}")]
    ArityMismatch {
        node: usize,
        expected: usize,
        found: usize,
    },
    #[error("leaf node {node} has output dimension {dim}, expected a scalar")]
    NonScalarLeaf { node: usize, dim: usize },
    #[error("edge references unknown node {node}")]
    UnknownNode { node: usize },
    #[error("graph has no function nodes")]
    EmptyGraph,
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },
    #[error("trace was produced by a different graph")]
    StaleTrace,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("finite sum needs at least one sample")]
    EmptyDataset,
    #[error("objective returned a non-finite gradient")]
    NonFiniteGradient,
    #[error("objective is not a chain of pipeline stages")]
    NotAChain,
    #[error("objective depth {found} does not match configured pipeline depth {expected}")]
    DepthMismatch { expected: usize, found: usize },
    #[error("epsilon {epsilon} must lie in (0, 3L) with L = {lipschitz}")]
    InvalidEpsilon { epsilon: f64, lipschitz: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("config error: {0}")]
    ConfigParse(String),
    #[error("unknown objective '{0}'")]
    ObjectiveUnknown(String),
    #[error("unknown schedule mode '{0}'")]
    UnknownMode(String),
    #[error("cannot write output: {0}")]
    OutputUnwritable(String),
    #[error("no records to plot")]
    EmptyRecords,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
