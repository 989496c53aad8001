//! File formats, the staged pipeline and the command line around `qpde-core`.

pub mod config;
pub mod container;
pub mod error;
pub mod fcidump;
pub mod pipeline;
pub mod report;

pub use config::RunConfig;
pub use error::{QpdeError, Result};
