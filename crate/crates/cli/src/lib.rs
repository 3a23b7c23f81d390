//! Library surface of the command-line tools: on-disk corpus formats,
//! the subcommand implementations, and SVG plot rendering. The `armpose`
//! binary in `main.rs` is a thin clap dispatcher over these.

pub mod commands;
pub mod session;
pub mod svg;
