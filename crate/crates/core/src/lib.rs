//! Budget-aware selection of LLM inference acceleration methods.
//!
//! Historical runtimes of (task, method, hardware) triples train a
//! meta-learner over text-embedded descriptions of each entity. At serving
//! time the learner ranks every method for a new workload and the fastest
//! method whose estimated cost fits the budget is chosen.

pub mod domain;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod perfdb;
pub mod predictor;
pub mod selection;
pub mod selectors;

pub use domain::*;
pub use error::{Error, Result};
