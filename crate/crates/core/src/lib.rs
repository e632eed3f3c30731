//! Exact simulation of quantum query algorithms against random permutations,
//! with numerical checks of the query lower-bound machinery for them.
//!
//! Points of `[N]` are 0-based in every API; text interfaces use 1-based
//! one-line notation.

pub mod circuit;
pub mod error;
pub mod lab;
pub mod linalg;
pub mod oracle;
pub mod perm;
pub mod relation;

pub use error::{Error, Result};
