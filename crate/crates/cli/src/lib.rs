//! Library side of the `mf` command: configuration, the run pipeline and
//! report rendering.

pub mod config;
pub mod pipeline;
pub mod report;

pub use config::RunConfig;
pub use pipeline::{coarsen_only, run};
pub use report::Report;

/// Environment variable capping the worker thread count.
pub const THREADS_VAR: &str = "MF_THREADS";
