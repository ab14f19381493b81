//! The `forge` command line and HTTP service over `forge_core`.

pub mod api;
pub mod cli;
pub mod config;
pub mod opts;

pub use cli::{main_with, parse, Cli};
