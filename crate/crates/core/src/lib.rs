//! Statevector simulation of quantum image pattern matching.
//!
//! A query image is compared against a database held in superposition by
//! preparing the overlap state, amplifying the all-zero data-register
//! subspace with Grover iterations, and reading out the index register.

pub mod aae;
pub mod dataset;
pub mod encoding;
pub mod error;
pub mod fmt;
pub mod grover;
pub mod matcher;
pub mod noise;
pub mod sim;
pub mod toy;

pub use error::{Error, Result};
