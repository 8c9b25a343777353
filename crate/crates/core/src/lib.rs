//! Exact construction and verification of a universal function for the Walsh system
//! in weighted `L^1`.

pub mod cascade;
pub mod config;
pub mod dyadic;
pub mod error;
pub mod exact;
pub mod flat;
pub mod report;
pub mod walsh;
pub mod universal;
pub mod weight;

pub use error::{Error, Result};
