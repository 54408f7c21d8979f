//! File formats and reports behind the `nepv` binary.

pub mod io;
pub mod report;
