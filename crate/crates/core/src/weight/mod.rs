//! Enumeration of dyadic step functions and the weight `μ` with `|{μ = 1}| > 1 - δ`.

pub mod build;
pub mod enumerate;

pub use build::{build_stage, build_weight, n_tilde, stage_tolerance, StagePolicy, WeightFunction, WeightOptions, WeightStage};
pub use enumerate::{enumerate_steps, first_steps, EnumerationParams, StepEnumeration};
pub mod verify;

pub use verify::{verify_weight, weighted_prefix_bound, weighted_series_norm};
pub mod apply;

pub use apply::{select_stage, verify_weighted_pair, weighted_build, StageChoice, WeightedPair};
pub mod record;

pub use record::{weight_from_json, weight_to_json, WeightRecord};
