//! Configuration, pipeline driver and reports for the `kbt` command-line
//! tool.

pub mod args;
pub mod config;
pub mod error;
pub mod oracle;
pub mod pipeline;

pub use config::PipelineConfig;
pub use error::CliError;
