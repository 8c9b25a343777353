//! Cascades of flat atoms and constant filler blocks approximating `γ χ_Δ`, and their
//! chaining over the pieces of a step function.

pub mod build;
pub mod schedule;
pub mod step_approx;
pub mod verify;

pub use build::{build_cascade, CascadePair, CascadeRecord};
pub use schedule::{choose_schedule, LevelPolicy, Schedule, ScheduleRequest, Stage};
pub use verify::{verify_cascade, VerifyOptions};
pub use step_approx::{build_step_approx, verify_step_approx, CascadePolicy, StepApprox, StepApproxRequest, StepVerifyOptions};
