//! Configuration files, run artifacts and commands for the `dvnn` binary.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

pub use error::{AppError, AppResult};
