//! Command-line front end and local session service for rigforge.

pub mod cli;
pub mod exit;
pub mod service;

pub use cli::{run, Cli};
pub use exit::{Failure, Status};
