//! The Walsh system in Paley order.

mod functions;
mod kernel;
pub mod series;
mod transform;
mod verify;

pub use functions::{rademacher, walsh_eval, walsh_eval_u64, walsh_function, walsh_tree};
pub use kernel::{block_kernel, block_l2_norm, full_kernel, upper_kernel, KernelVariant};
pub use transform::{bit_reverse, fwht, fwht_f64, inverse_fwht, inverse_fwht_f64, CoefficientArray};
pub use verify::{float_round_trip_error, verify_walsh, WalshVerifyOptions};
