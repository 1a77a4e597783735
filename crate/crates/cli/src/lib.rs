//! Library side of the `mdx` command: instance and result schemas, loading
//! with line-anchored diagnostics, and the subcommands.

pub mod commands;
pub mod load;
pub mod locate;
pub mod schema;
