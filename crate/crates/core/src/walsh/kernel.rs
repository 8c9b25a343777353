use serde::{Deserialize, Serialize};

use crate::dyadic::{DyadicInterval, DyadicTree, StepFunction};
use crate::error::{Error, Result};
use crate::exact::{pow2, QS2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelVariant {
    /// `sum_{k < 2^m} W_k`
    Full,
    /// `sum_{2^m <= k < 2^(m+1)} W_k`
    UpperHalf,
}

/// Closed form of the Walsh block sums, refused when `m` exceeds the dense budget.
pub fn block_kernel(m: u32, variant: KernelVariant, budget: u32) -> Result<StepFunction> {
    if m > budget {
        return Err(Error::BudgetExceeded { level: m, budget });
    }
    Ok(match variant {
        KernelVariant::Full => full_kernel(m),
        KernelVariant::UpperHalf => upper_kernel(m),
    })
}

/// `2^m` on `[0, 2^-m)`, zero elsewhere.
pub fn full_kernel(m: u32) -> StepFunction {
    let cell = DyadicInterval::new(0, m).expect("index 0 is in range");
    StepFunction::indicator(&cell, QS2::from(pow2(m as i64)))
}

/// `2^m` on `[0, 2^-(m+1))`, `-2^m` on `[2^-(m+1), 2^-m)`, zero elsewhere. Structured, so
/// any `m` is fine.
pub fn upper_kernel(m: u32) -> StepFunction {
    let v = QS2::from(pow2(m as i64));
    let mut t = DyadicTree::split(DyadicTree::leaf(v.clone()), DyadicTree::leaf(-v));
    for _ in 0..m {
        t = DyadicTree::split(t, DyadicTree::leaf(QS2::zero()));
    }
    StepFunction::from_tree(t)
}

/// `(sum_{k in block} a_k^2)^(1/2) = b 2^(n/2)` for a level-`n` block of constant magnitude
/// `b`; bounds the `L^1` norm of every prefix of the block.
pub fn block_l2_norm(magnitude: &QS2, level: u32) -> QS2 {
    magnitude * &crate::exact::half_power(-(level as i64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::DyadicSet;
    use crate::exact::DyadicRational;
    use crate::walsh::walsh_eval_u64;

    #[test]
    fn paper_examples() {
        let f = block_kernel(2, KernelVariant::Full, 22).unwrap();
        let g: Vec<_> = f.grid(3, 22).unwrap();
        assert_eq!(g[..2], [QS2::from_int(4), QS2::from_int(4)]);
        assert!(g[2..].iter().all(|v| v.is_zero()));
        let u = block_kernel(2, KernelVariant::UpperHalf, 22).unwrap();
        let g = u.grid(3, 22).unwrap();
        assert_eq!(g[0], QS2::from_int(4));
        assert_eq!(g[1], QS2::from_int(-4));
        assert!(g[2..].iter().all(|v| v.is_zero()));
        assert!(block_kernel(30, KernelVariant::Full, 22).is_err());
    }

    #[test]
    fn upper_kernel_has_unit_l1() {
        for m in 0..=10 {
            assert_eq!(upper_kernel(m).integrate(&DyadicSet::unit(), None), QS2::one());
        }
        assert_eq!(upper_kernel(300).l1(), QS2::one());
    }

    #[test]
    fn kernels_match_direct_sums() {
        for m in 0..=8u32 {
            let j = m + 1;
            let full = full_kernel(m);
            let upper = upper_kernel(m);
            for g in 0..1u64 << j {
                let x = DyadicRational::from_u64(g, j);
                let s_full: i64 = (0..1u64 << m).map(|k| walsh_eval_u64(k, &x) as i64).sum();
                let s_up: i64 = (1u64 << m..1u64 << (m + 1)).map(|k| walsh_eval_u64(k, &x) as i64).sum();
                assert_eq!(full.eval(&x), &QS2::from_int(s_full));
                assert_eq!(upper.eval(&x), &QS2::from_int(s_up));
            }
        }
    }

    #[test]
    fn majorant_arithmetic() {
        assert_eq!(block_l2_norm(&QS2::from_ratio(1, 4), 3), "1/2*sqrt2".parse().unwrap());
        assert!(block_l2_norm(&QS2::zero(), 5).is_zero());
    }
}
