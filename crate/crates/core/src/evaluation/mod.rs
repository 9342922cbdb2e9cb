//! Ranking metrics, significance tests and experiment drivers.

mod experiment;
mod metrics;
mod stats;

pub use experiment::*;
pub use metrics::*;
pub use stats::*;
