//! File formats, reports and commands behind the `mdport` binary.

pub mod commands;
pub mod error;
pub mod io;
pub mod manifest;
pub mod report;

pub use error::CliError;
