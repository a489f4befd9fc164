//! Files, threads and the command line around `soupgnn-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset_io;
pub mod error;
pub mod orchestrator;
pub mod partition_io;
pub mod prepare;
pub mod report;

pub use error::IoError;
