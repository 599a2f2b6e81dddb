//! Centered and weighted least squares for moderated causal effects in
//! micro-randomized trials, with GEE comparators and a simulation harness.

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod features;
pub mod gee;
pub mod inference;
pub mod linalg;
pub mod pipeline;
pub mod prob;
pub mod sim;
pub mod wcls;

pub use error::Error;
