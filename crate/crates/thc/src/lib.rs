//! File formats, parallel estimation, reports and the command-line tool for
//! hyper-parameter consistency analysis. The computations live in `thc-core`.

#![warn(missing_debug_implementations, rust_2018_idioms)]

pub mod cli;
pub mod io;
pub mod parallel;
pub mod rank;
pub mod report;

pub use thc_core as core;
