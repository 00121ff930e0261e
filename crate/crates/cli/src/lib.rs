//! Formatting and rendering for the `lienard-lab` command line.

pub mod format;
pub mod portrait;
pub mod table;
