//! Command line, file formats and evaluation suites for `atsc-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod export;
pub mod netfile;

pub use checkpoint::Checkpoint;
pub use config::{NetworkSource, RunConfig};
pub use error::{AtscError, Result};
pub use eval::{cross_test, evaluate, stability_suite, EvalReport};
