//! Library surface of the experiment harness, so integration tests can run
//! experiments in-process with controlled thread counts.

pub mod config;
pub mod emit;
pub mod error;
pub mod experiments;

pub use config::{ExperimentKind, RunConfig};
pub use error::AppError;
pub use experiments::execute;
