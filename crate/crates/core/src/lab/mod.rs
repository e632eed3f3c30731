//! Verification routines for the lower-bound argument.

pub mod attack;
pub mod bounds;
pub mod db;
pub mod fundamental;
pub mod gamma;
pub mod progress;
pub mod report;
pub mod sampling;
pub mod suite;
