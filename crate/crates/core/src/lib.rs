//! Star-schema learning toolkit: feature views over key/foreign-key joins,
//! categorical classifiers, Monte Carlo join-avoidance simulations, a
//! tuple-ratio advisor, and foreign-key compression and smoothing.

pub mod advisor;
pub mod classifiers;
pub mod error;
pub mod fk_tools;
pub mod relational;
pub mod simulation;

pub use error::{Error, Result};
