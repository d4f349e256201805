//! Command-line harness around `dcp-core`: pair archives, registration,
//! training, evaluation reports and timing.
//!
//! Exit codes are stable: 0 success, 2 usage error, 3 data error,
//! 4 numerical failure.

pub mod cli;
pub mod cmd;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod report;

pub use error::{Result, ToolError};
