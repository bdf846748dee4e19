//! Multi-objective genetic programming for imbalanced binary
//! classification, with semantic-diversity variants of NSGA-II and SPEA2.

pub mod dataset;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod expr;
pub mod metrics;
pub mod pareto;
pub mod semantic;
pub mod stats;
pub mod variation;

pub use error::{Error, Result};
