//! Multi-modal bug localization.
//!
//! Ranks the methods of a program by how likely they are to contain the bug
//! described in a report. Three signals are extracted for every
//! (bug report, method) pair: textual similarity, Tarantula suspiciousness of
//! the method under the bug's test spectra, and a word-level suspiciousness
//! similarity that mixes both. A per-query integrator with bug-report and
//! method parameter vectors fuses them; its loss couples similar bug reports and
//! similar methods through network-Lasso penalties over two similarity graphs.

pub mod aml;
pub mod cli;
pub mod corpus;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod graphs;
pub mod integrator;
pub mod pipeline;
pub mod spectra;

pub use error::{Error, Result};

/// Number of features per (bug, method) pair.
pub const NUM_FEATURES: usize = 3;
