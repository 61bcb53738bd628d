//! Monte Carlo comparison of regression and representational similarity
//! analysis (RSA) as tools for choosing between two candidate models.
//!
//! The crate simulates paired datasets with a known better model, scores
//! them with RSA variants and regression, and summarises how often each
//! method picks the right model.

pub mod empirical;
pub mod error;
pub mod harness;
pub mod linmod;
pub mod methods;
pub mod metrics;
pub mod rdm;
pub mod simgen;

pub use error::{Error, Result};
pub use harness::{run_experiment, Experiment, ExperimentConfig};
pub use methods::{Method, Outcome};
pub use rdm::{Metric, Rdm};
