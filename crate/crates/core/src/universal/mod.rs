//! The universal function and the greedy sign selection towards a target.

pub mod build;
pub mod record;
pub mod report;
pub mod select;

pub use build::{build_universal, verify_universal, UniversalFunction};
pub use record::{universal_from_json, universal_to_json, UniversalRecord};
pub use report::{convergence_csv, convergence_report, ConvergenceRow};
pub use select::{approximate, verify_selection, SelectOptions, SignSelection, StageStep};
