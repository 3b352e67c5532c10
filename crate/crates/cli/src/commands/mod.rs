//! Subcommand implementations. Each resolves and echoes its configuration,
//! runs, and writes its outputs into the configured directory.

pub mod analyze;
pub mod episodes;
pub mod eval;
pub mod gen;
pub mod train;
