//! Dyadic intervals, finite dyadic unions, and dyadic step functions.

mod interval;
mod set;
mod record;
mod step;
pub mod tree;

pub use interval::DyadicInterval;
pub use set::DyadicSet;
pub use record::{FunctionRecord, SetRecord, LISTING_LIMIT};
pub use step::{IntegralCache, Piece, StepFunction};
pub use tree::{DyadicTree, TableNode};

/// Default cap on the level of any dense `2^J`-point grid.
pub const DEFAULT_J_MAX: u32 = 22;
