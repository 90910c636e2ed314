//! Query-limited planted dense subgraph detection: instance generation,
//! budgeted edge queries, scan and degree detectors, closed-form bounds and
//! a Monte Carlo risk harness.

pub mod bounds;
pub mod detectors;
pub mod divergences;
pub mod error;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod seed;
pub mod strategies;

pub use error::{Error, Result};
pub use model::{Hypothesis, Instance, ModelParams};
