//! File formats, workloads, scenarios and campaigns around the no_std
//! `shellft-core` crate, plus the `shellft` command-line tool.

pub mod blueprint_io;
pub mod campaign;
pub mod cli;
pub mod report;
pub mod scenario;
pub mod script;
pub mod trace_io;
pub mod workload;
