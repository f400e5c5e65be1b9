//! Böttcher coordinates for superattracting fixed points in one and several
//! complex variables.

pub mod algebra;
pub mod bottcher1d;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod fields;
pub mod green;
pub mod koch;
pub mod quasihom;
pub mod render;

pub use error::{Error, Result};
