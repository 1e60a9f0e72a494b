//! Command-line harness for the `adawct` library.

pub mod commands;
pub mod exit;
pub mod report;
pub mod suites;
pub mod tensor_file;

pub use commands::run;
pub use exit::{CliError, CliResult, Exit};
