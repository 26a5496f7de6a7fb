//! Report types for the `multiscale` command-line tool.

pub mod report;
