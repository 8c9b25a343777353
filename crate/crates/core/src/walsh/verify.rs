//! Kernel identities and transform round trips checked against direct summation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fwht, fwht_f64, inverse_fwht, inverse_fwht_f64, walsh_eval_u64};
use crate::exact::{DyadicRational, QS2};
use crate::report::{Check, Mode, VerificationReport};

#[derive(Clone, Debug)]
pub struct WalshVerifyOptions {
    /// Kernel identities for `m = 1..=max_m`.
    pub max_m: u32,
    /// Exact round trips for `J = 0..=exact_level`.
    pub exact_level: u32,
    /// Floating-point round trip at this level.
    pub float_level: u32,
    pub float_tolerance: f64,
    pub seed: u64,
}

impl Default for WalshVerifyOptions {
    fn default() -> Self {
        WalshVerifyOptions { max_m: 8, exact_level: 12, float_level: 20, float_tolerance: 1e-12, seed: 0 }
    }
}

/// `Σ_{k in ks} W_k(x)` against `expected(x)` at every point of the level-`(m+1)` grid.
fn kernel_matches(m: u32, ks: std::ops::Range<u64>, expected: impl Fn(u64) -> i64) -> Option<u64> {
    let level = m + 1;
    (0..1u64 << level).find(|&i| {
        let x = DyadicRational::from_u64(i, level);
        ks.clone().map(|k| walsh_eval_u64(k, &x) as i64).sum::<i64>() != expected(i)
    })
}

/// Largest absolute round-trip error of the floating-point transform.
pub fn float_round_trip_error(level: u32, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..1usize << level).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let back = inverse_fwht_f64(&fwht_f64(&v).expect("power of two")).expect("power of two");
    v.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

pub fn verify_walsh(opts: &WalshVerifyOptions) -> VerificationReport {
    let mode = Mode::Paper;
    let mut checks = Vec::new();
    for m in 1..=opts.max_m {
        let p = 1i64 << m;
        // grid point i at level m+1 lies in [0, 2^-m) iff i < 2, in [0, 2^-(m+1)) iff i == 0
        let full = kernel_matches(m, 0..1 << m, |i| if i < 2 { p } else { 0 });
        checks.push(Check::flag(
            &format!("full_kernel_{m}"),
            full.is_none(),
            mode,
            true,
            full.map(|i| format!("mismatch at {i}/2^{}", m + 1)),
        ));
        let upper = kernel_matches(m, 1 << m..1 << (m + 1), |i| match i {
            0 => p,
            1 => -p,
            _ => 0,
        });
        checks.push(Check::flag(
            &format!("upper_kernel_{m}"),
            upper.is_none(),
            mode,
            true,
            upper.map(|i| format!("mismatch at {i}/2^{}", m + 1)),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for j in 0..=opts.exact_level {
        let v: Vec<QS2> = (0..1usize << j)
            .map(|_| QS2::from_ratio(rng.gen_range(-50..50), 7) + QS2::sqrt2() * QS2::from_ratio(rng.gen_range(-5..5), 3))
            .collect();
        let ok = fwht(&v, opts.exact_level).and_then(|c| inverse_fwht(&c, opts.exact_level)).is_ok_and(|b| b == v);
        checks.push(Check::flag(&format!("exact_round_trip_{j}"), ok, mode, true, None));
    }
    let err = float_round_trip_error(opts.float_level, opts.seed);
    checks.push(Check::flag(
        &format!("float_round_trip_{}", opts.float_level),
        err <= opts.float_tolerance,
        mode,
        true,
        Some(format!("max error {err:e} against {:e}", opts.float_tolerance)),
    ));
    VerificationReport::new("walsh", mode, checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities_hold() {
        let rep = verify_walsh(&WalshVerifyOptions { max_m: 5, exact_level: 6, float_level: 12, ..Default::default() });
        assert!(rep.pass, "{:#?}", rep.failures());
        assert_eq!(rep.checks.len(), 10 + 7 + 1);
    }

    #[test]
    fn wrong_kernel_is_caught() {
        assert!(kernel_matches(3, 0..7, |i| if i < 2 { 8 } else { 0 }).is_some());
    }
}
