use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("node id {id} out of range for {num_nodes} nodes")]
    NodeOutOfRange { id: usize, num_nodes: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("empty node set")]
    EmptyNodeSet,
    #[error("batch has no training nodes")]
    EmptyTrainingMask,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("training diverged at epoch {epoch}, step {step} ({what})")]
    Diverged {
        epoch: u64,
        step: usize,
        what: &'static str,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("architecture mismatch: {0}")]
    ArchMismatch(String),
    #[error("ingredients do not share one initialization ({0} vs {1})")]
    InitMismatch(String, String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
}

pub type Result<T> = core::result::Result<T, Error>;
