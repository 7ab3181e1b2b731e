//! File formats, table IO, and the rayon execution backend for the
//! cib-core solvers. The `cibgames` binary lives in this crate.

pub mod format;
pub mod runner;
pub mod tables_io;
