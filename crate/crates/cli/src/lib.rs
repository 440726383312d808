//! Command-line front end for `securecache-core`: experiment configs,
//! end-to-end simulation with checks, and CSV/JSON/binary output formats.

pub mod config;
pub mod output;
pub mod simulate;
